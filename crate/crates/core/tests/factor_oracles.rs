//! ML extraction and promax checked against values computed with an
//! independent numpy/scipy port of the R routines (`factanal` objective,
//! `stats::varimax`, `stats::promax`).

use eda_sleep::factors::{ml_extract, promax_rotate, EfaOptions};
use nalgebra::DMatrix;

/// Match each reference column to a column of `got` up to sign. Returns the
/// permutation and signs.
fn match_columns(reference: &DMatrix<f64>, got: &DMatrix<f64>) -> Vec<(usize, f64)> {
    let k = reference.ncols();
    let mut used = vec![false; k];
    (0..k)
        .map(|j| {
            let mut best = (usize::MAX, 1.0, f64::INFINITY);
            for c in (0..k).filter(|c| !used[*c]) {
                for s in [1.0, -1.0] {
                    let d = (reference.column(j) - got.column(c) * s).amax();
                    if d < best.2 {
                        best = (c, s, d);
                    }
                }
            }
            used[best.0] = true;
            (best.0, best.1)
        })
        .collect()
}

/// Tolerance 1e-6: varimax stops on a relative criterion change, which
/// pins the rotation angle only to about the square root of its tolerance.
fn check_promax(unrotated: DMatrix<f64>, pattern: DMatrix<f64>, phi: DMatrix<f64>) {
    let rot = promax_rotate(&unrotated, 4).unwrap();
    let m = match_columns(&pattern, &rot.pattern);
    let k = pattern.ncols();
    for j in 0..k {
        let (c, s) = m[j];
        for i in 0..pattern.nrows() {
            let got = rot.pattern[(i, c)] * s;
            assert!((got - pattern[(i, j)]).abs() < 1e-6, "pattern[{i},{j}] {got} vs {}", pattern[(i, j)]);
        }
        for l in 0..k {
            let (c2, s2) = m[l];
            let got = rot.factor_correlations[(c, c2)] * s * s2;
            assert!((got - phi[(j, l)]).abs() < 1e-6, "phi[{j},{l}] {got} vs {}", phi[(j, l)]);
        }
    }
    let back = &unrotated * &rot.rotation;
    assert!((back - &rot.pattern).amax() < 1e-10);
}

#[test]
fn promax_two_factors_matches_reference() {
    let a = DMatrix::from_row_slice(6, 2, &[0.71, 0.32, 0.65, 0.41, 0.58, -0.12, 0.44, -0.55, 0.52, -0.47, 0.60, 0.05]);
    let pattern = DMatrix::from_row_slice(
        6,
        2,
        &[
            0.801951591022,
            0.048734612991,
            0.839262573854,
            0.17057174957,
            0.312683603432,
            -0.370643068605,
            -0.174854929936,
            -0.77509533356,
            -0.045041190385,
            -0.722313937445,
            0.479808325814,
            -0.196024535911,
        ],
    );
    let phi = DMatrix::from_row_slice(2, 2, &[1.0, -0.49895883127, -0.49895883127, 1.0]);
    check_promax(a, pattern, phi);
}

#[test]
fn promax_three_factors_matches_reference() {
    let a = DMatrix::from_row_slice(
        7,
        3,
        &[
            0.62, 0.31, 0.20, 0.70, 0.25, -0.15, 0.55, -0.40, 0.22, 0.48, -0.52, 0.05, 0.51, 0.10, -0.45, 0.66, 0.05,
            -0.38, 0.40, 0.30, 0.35,
        ],
    );
    let pattern = DMatrix::from_row_slice(
        7,
        3,
        &[
            0.137316982801,
            -0.011786576557,
            0.64245388481,
            0.53661792603,
            0.020543258338,
            0.351667702671,
            -0.054461828502,
            -0.682450159241,
            0.134035858505,
            0.070847169411,
            -0.71240128914,
            -0.11697931151,
            0.738566983806,
            0.05395074763,
            -0.076638384967,
            0.724498595271,
            -0.078136870698,
            0.009179765218,
            -0.127785776654,
            0.012602978161,
            0.66291446727,
        ],
    );
    let phi = DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0,
            -0.394987471636,
            0.467458185306,
            -0.394987471636,
            1.0,
            -0.330241346868,
            0.467458185306,
            -0.330241346868,
            1.0,
        ],
    );
    check_promax(a, pattern, phi);
}

#[test]
fn ml_extraction_matches_reference_optimum() {
    let r = DMatrix::from_row_slice(
        6,
        6,
        &[
            1.0, 0.58, 0.6, 0.18, 0.08, 0.22, 0.58, 1.0, 0.525, 0.21, 0.16, 0.26, 0.6, 0.525, 1.0, 0.075, 0.0, 0.15,
            0.18, 0.21, 0.075, 1.0, 0.56, 0.44, 0.08, 0.16, 0.0, 0.56, 1.0, 0.48, 0.22, 0.26, 0.15, 0.44, 0.48, 1.0,
        ],
    );
    let psi_ref = [0.34759946, 0.47303089, 0.43679997, 0.49943917, 0.35585557, 0.60257417];
    let (l, psi, f, converged, _) = ml_extract(&r, 2, &EfaOptions::default()).unwrap();
    assert!(converged);
    assert!((f - 0.0020607233795528757).abs() < 1e-9, "discrepancy {f}");
    for (got, want) in psi.iter().zip(psi_ref) {
        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
    }
    // communalities plus uniquenesses reproduce the unit diagonal
    let ll = &l * l.transpose();
    for i in 0..6 {
        assert!((ll[(i, i)] + psi[i] - 1.0).abs() < 1e-8);
    }
}
