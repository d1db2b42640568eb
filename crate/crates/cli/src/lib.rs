//! Library behind the `stratakit` binary: strata, estimate campaigns and coarea slab covers from the
//! command line.
//!
//! Exit status: 0 when every report passes, 1 when a bound is exceeded,
//! 2 on invalid input, 3 on a numeric failure or theorem violation.

pub mod canonical;
pub mod commands;
pub mod output;
pub mod scene;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use stratakit_core::GeomError;

use commands::{CoareaArgs, SampleMap, StratifyArgs, VerifyArgs};

#[derive(Parser)]
#[command(name = "stratakit", version, about = "Distance-bundle strata and estimate checks for closed sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the scene's probe points into the stratum B_m.
    Stratify {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        q_grid: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run randomized checks of the quantitative estimates.
    Verify {
        #[arg(long)]
        scene: PathBuf,
        /// Estimate ids (comma separated or repeated); defaults to
        /// params.estimates of the scene.
        #[arg(long, value_delimiter = ',')]
        estimate: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy slab cover of a gridded map.
    Coarea {
        /// Grid file in the binary layout.
        #[arg(long, alias = "scene")]
        grid: PathBuf,
        #[arg(long)]
        m: Option<usize>,
        /// Minimum node count for a value bin to belong to Z.
        #[arg(long, default_value_t = 16.0)]
        z_threshold: f64,
        #[arg(long, default_value_t = 1.0 / 64.0)]
        bin_width: f64,
        #[arg(long, default_value_t = 4.0)]
        lip_bound: f64,
        #[arg(long, default_value_t = 4)]
        stride: usize,
        #[arg(long, default_value_t = 16)]
        random_planes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Exit with status 1 when the covered fraction is lower.
        #[arg(long)]
        min_coverage: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a scene file and print it in normalized form.
    Scene {
        #[arg(long)]
        scene: PathBuf,
    },
    /// Write one of the built-in sample maps as a grid file.
    Grid {
        #[arg(long, value_enum)]
        map: SampleMap,
        /// Grid spacing.
        #[arg(long, default_value_t = 1.0 / 64.0)]
        h: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn numeric(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        matches!(
            e.downcast_ref::<GeomError>(),
            Some(
                GeomError::UnboundedGamma(_)
                    | GeomError::Contradiction(_)
                    | GeomError::InsufficientSample(_)
                    | GeomError::TheoremViolation(_)
            )
        )
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    if let Ok(v) = std::env::var("STRATAKIT_THREADS") {
        match v.parse::<usize>() {
            Ok(t) if t > 0 => {
                stratakit_core::par::init_thread_pool(t);
            }
            _ => log::warn!("ignoring STRATAKIT_THREADS={v}"),
        }
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    let outcome = match cli.command {
        Command::Stratify { scene, m, q_grid, seed, out } => commands::stratify(&StratifyArgs { scene, m, q_grid, seed, out }),
        Command::Verify { scene, estimate, seed, out } => commands::verify(&VerifyArgs {
            scene,
            estimates: estimate,
            seed,
            out,
        }),
        Command::Coarea {
            grid,
            m,
            z_threshold,
            bin_width,
            lip_bound,
            stride,
            random_planes,
            seed,
            min_coverage,
            out,
        } => commands::coarea(&CoareaArgs {
            grid,
            m,
            z_threshold,
            bin_width,
            lip_bound,
            stride,
            random_planes,
            seed,
            min_coverage,
            out,
        }),
        Command::Scene { scene } => scene::SceneSpec::load(&scene)
            .and_then(|spec| {
                spec.build_set()?;
                print!("{}", spec.to_toml()?);
                Ok(commands::Status::Pass)
            }),
        Command::Grid { map, h, out } => commands::write_sample_grid(map, h, &out).map(|_| commands::Status::Pass),
    };
    match outcome {
        Ok(status) => status.exit_code() as u8,
        Err(err) => {
            eprintln!("error: {err:#}");
            if numeric(&err) {
                3
            } else {
                2
            }
        }
    }
}
