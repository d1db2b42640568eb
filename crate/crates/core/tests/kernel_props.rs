use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;
use stratakit_core::kernel::{hausdorff_distance, project_onto_flat, rank_of, AffineFlat, Vector};

/// Rank by exact Gaussian elimination over the rationals.
fn exact_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect())
        .collect();
    let ncols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        for i in 0..m.len() {
            if i != rank && !m[i][col].is_zero() {
                let f = &m[i][col] / &m[rank][col];
                for j in col..ncols {
                    let d = &f * &m[rank][j];
                    m[i][j] -= d;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn to_vectors(rows: &[Vec<i64>]) -> Vec<Vector> {
    rows.iter()
        .map(|r| Vector::new(&r.iter().map(|&x| x as f64).collect::<Vec<_>>()).unwrap())
        .collect()
}

/// Integer rows, some of them integer combinations of earlier rows so that
/// rank deficiency is common.
fn integer_rows() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=6, 1usize..=7).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(prop::collection::vec(-3i64..=3, n), k),
            prop::collection::vec((any::<bool>(), -2i64..=2, -2i64..=2), k),
        )
            .prop_map(|(mut rows, mix)| {
                for i in 2..rows.len() {
                    let (dep, a, b) = mix[i];
                    if dep {
                        rows[i] = (0..rows[i].len()).map(|j| a * rows[0][j] + b * rows[1][j]).collect();
                    }
                }
                rows
            })
    })
}

fn point(n: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-5.0f64..5.0, n).prop_map(|c| Vector::new(&c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn rank_matches_exact_rational_rank(rows in integer_rows()) {
        prop_assert_eq!(rank_of(&to_vectors(&rows), 1e-9).unwrap(), exact_rank(&rows));
    }

    #[test]
    fn rank_is_permutation_and_scale_invariant(
        rows in integer_rows(),
        seed in any::<u64>(),
        exps in prop::collection::vec(-6.0f64..=6.0, 7),
        signs in prop::collection::vec(any::<bool>(), 7),
    ) {
        let vs = to_vectors(&rows);
        let base = rank_of(&vs, 1e-9).unwrap();
        let mut perm: Vec<usize> = (0..vs.len()).collect();
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let scaled: Vec<Vector> = perm
            .iter()
            .map(|&i| {
                let f = 10f64.powf(exps[i]) * if signs[i] { -1.0 } else { 1.0 };
                vs[i] * f
            })
            .collect();
        prop_assert_eq!(rank_of(&scaled, 1e-9).unwrap(), base);
    }

    #[test]
    fn flat_projection_is_idempotent_and_contractive(
        (base, dirs, x, y) in (2usize..=6).prop_flat_map(|n| {
            (point(n), prop::collection::vec(point(n), 0..n), point(n), point(n))
        })
    ) {
        let flat = AffineFlat::spanned_by(base, &dirs).unwrap();
        let px = project_onto_flat(&x, &flat).unwrap();
        let ppx = project_onto_flat(&px, &flat).unwrap();
        prop_assert!(px.dist(&ppx) <= 1e-12 * (1.0 + px.norm()));
        let py = project_onto_flat(&y, &flat).unwrap();
        prop_assert!(px.dist(&py) <= x.dist(&y) + 1e-10);
    }

    #[test]
    fn hausdorff_triangle_inequality(
        (a, b, c) in (1usize..=4).prop_flat_map(|n| {
            (
                prop::collection::vec(point(n), 1..8),
                prop::collection::vec(point(n), 1..8),
                prop::collection::vec(point(n), 1..8),
            )
        })
    ) {
        let ab = hausdorff_distance(&a, &b).unwrap();
        let bc = hausdorff_distance(&b, &c).unwrap();
        let ac = hausdorff_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-10);
        prop_assert!((ab - hausdorff_distance(&b, &a).unwrap()).abs() <= 1e-12);
    }
}

fn hull_dim(vertices: &[Vector]) -> usize {
    let diffs: Vec<Vector> = vertices[1..].iter().map(|v| *v - vertices[0]).collect();
    if diffs.is_empty() {
        return 0;
    }
    rank_of(&diffs, 1e-9).unwrap()
}

#[test]
fn hull_dimension_is_lower_semicontinuous() {
    let v = |c: &[f64]| Vector::new(c).unwrap();
    let segments: Vec<Vec<Vector>> = (1..=30)
        .map(|k| {
            let t = 0.5f64.powi(k);
            vec![v(&[1.0, 2.0, 0.0]), v(&[1.0 + t, 2.0 - t, 0.5 * t])]
        })
        .collect();
    let seg_limit = vec![v(&[1.0, 2.0, 0.0]), v(&[1.0, 2.0, 0.0])];
    let liminf = segments.iter().map(|s| hull_dim(s)).min().unwrap();
    assert_eq!(liminf, 1);
    assert_eq!(hull_dim(&seg_limit), 0);
    assert!(hull_dim(&seg_limit) <= liminf);

    let triangles: Vec<Vec<Vector>> = (1..=20)
        .map(|k| {
            let t = 0.5f64.powi(k);
            vec![v(&[0.0, 0.0]), v(&[2.0, 0.0]), v(&[1.0, t])]
        })
        .collect();
    let tri_limit = vec![v(&[0.0, 0.0]), v(&[2.0, 0.0]), v(&[1.0, 0.0])];
    let liminf = triangles.iter().map(|s| hull_dim(s)).min().unwrap();
    assert_eq!(liminf, 2);
    assert_eq!(hull_dim(&tri_limit), 1);
    let h = hausdorff_distance(&triangles[19], &tri_limit).unwrap();
    assert!(h <= 1e-6);
}

#[test]
fn exact_rank_oracle_sanity() {
    assert_eq!(exact_rank(&[vec![1, 2], vec![2, 4]]), 1);
    assert_eq!(exact_rank(&[vec![1, 0, 0], vec![0, 1, 0], vec![1, 1, 0]]), 2);
    assert_eq!(exact_rank(&[vec![0, 0]]), 0);
}
