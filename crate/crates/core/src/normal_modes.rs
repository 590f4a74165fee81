//! The normal-mode frame `b_j = (1/sqrt 3) sum_j' exp(i j j' 2pi/3) a_j'`.
//!
//! In this frame the chiral Hamiltonian is diagonal,
//! `H = -2 kappa sigma_z sum_j sin(2 j pi / 3) b_j^dag b_j`, with mode
//! frequencies `0, -sqrt(3) kappa sigma_z, +sqrt(3) kappa sigma_z`.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::basis::Sigma;
use crate::hamiltonians::ModelParams;
use crate::C64;

/// One term of the corner-state expansion in b-mode occupations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalModeAmplitude {
    pub m: [u32; 3],
    pub amplitude: f64,
}

/// `F[j][j'] = exp(i j j' 2 pi / 3) / sqrt(3)`.
pub fn mode_transform_matrix() -> Matrix3<C64> {
    Matrix3::from_fn(|j, k| C64::from_polar(1.0 / 3f64.sqrt(), 2.0 * PI * (j * k) as f64 / 3.0))
}

/// Frequency of normal mode `j` for the given atom level.
pub fn mode_frequency(j: usize, sigma: Sigma, kappa: f64) -> f64 {
    -2.0 * kappa * sigma.z() * (2.0 * PI * j as f64 / 3.0).sin()
}

/// Energy of the b-mode number state `|m0, m1, m2>_b`.
pub fn normal_mode_energy(m: [u32; 3], sigma: Sigma, kappa: f64) -> f64 {
    (0..3)
        .map(|j| mode_frequency(j, sigma, kappa) * m[j] as f64)
        .sum()
}

/// `|N,0,0> = sum_m sqrt(N! / (3^N m0! m1! m2!)) |m0,m1,m2>_b`.
///
/// Terms are listed with `m0`, then `m1`, descending. Amplitudes are
/// evaluated in log space.
pub fn expand_corner_state(n: u32) -> Vec<NormalModeAmplitude> {
    use crate::ln_factorial as lf;
    let mut out = Vec::with_capacity(((n + 1) * (n + 2) / 2) as usize);
    for m0 in (0..=n).rev() {
        for m1 in (0..=n - m0).rev() {
            let m2 = n - m0 - m1;
            let log = 0.5 * (lf(n) - n as f64 * 3f64.ln() - lf(m0) - lf(m1) - lf(m2));
            out.push(NormalModeAmplitude {
                m: [m0, m1, m2],
                amplitude: log.exp(),
            });
        }
    }
    out
}

/// Energy and quasi-momentum of `|m0,m1,m2>_b`:
/// `E = sqrt(3) kappa sigma_z (m2 - m1)`, `p = 2 pi (m2 - m1) / 3`.
///
/// Quasi-momentum is positive along `a_0 -> a_1 -> a_2` with unit spacing
/// between cavities.
pub fn dispersion(m1: u32, m2: u32, sigma: Sigma, kappa: f64) -> (f64, f64) {
    let dm = m2 as f64 - m1 as f64;
    (3f64.sqrt() * kappa * sigma.z() * dm, 2.0 * PI * dm / 3.0)
}

/// `v_g = 3 sqrt(3) kappa sigma_z / (2 pi)`, in cavities per unit time.
pub fn group_velocity(params: &ModelParams, sigma: Sigma) -> f64 {
    3.0 * 3f64.sqrt() * params.kappa * sigma.z() / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_shell;
    use crate::hamiltonians::chiral_hamiltonian;

    #[test]
    fn transform_is_unitary() {
        let f = mode_transform_matrix();
        let s = 1.0 / 3f64.sqrt();
        for k in 0..3 {
            assert!((f[(0, k)] - C64::new(s, 0.0)).norm() < 1e-16);
        }
        assert!((f * f.adjoint() - Matrix3::identity()).camax() < 1e-14);
    }

    #[test]
    fn transform_diagonalizes_one_photon_block() {
        let kappa = 1.7;
        let h = chiral_hamiltonian(&ModelParams::with_kappa(kappa), &enumerate_shell(1)).unwrap();
        let d = h.to_dense();
        let block = Matrix3::from_fn(|r, c| d[(r, c)]);
        // a = F^dag b, so H in the b frame is F h F^dag
        let f = mode_transform_matrix();
        let hb = f * block * f.adjoint();
        let s3 = 3f64.sqrt() * kappa;
        let want = [0.0, s3, -s3]; // sigma_z = -1
        for j in 0..3 {
            assert!((hb[(j, j)] - C64::new(want[j], 0.0)).norm() < 1e-13, "{hb}");
            assert!((mode_frequency(j, Sigma::G, kappa) - want[j]).abs() < 1e-13);
            for k in 0..3 {
                if j != k {
                    assert!(hb[(j, k)].norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn corner_expansion_small_cases() {
        let one = expand_corner_state(1);
        assert_eq!(one.len(), 3);
        assert!(one
            .iter()
            .all(|t| (t.amplitude - 1.0 / 3f64.sqrt()).abs() < 1e-15));

        let two = expand_corner_state(2);
        let at = |m: [u32; 3]| two.iter().find(|t| t.m == m).unwrap().amplitude;
        assert!((at([2, 0, 0]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((at([1, 1, 0]) - (2.0f64 / 9.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn corner_expansion_matches_first_quantized_route() {
        // |N,0,0> is the symmetric product of N single-photon states |0>;
        // transform each factor with F and project onto b-occupation classes
        let f = mode_transform_matrix();
        for n in 0..=6u32 {
            let mut proj = std::collections::HashMap::<[u32; 3], C64>::new();
            for code in 0..3usize.pow(n) {
                let (mut c, mut occ, mut amp) = (code, [0u32; 3], C64::new(1.0, 0.0));
                for _ in 0..n {
                    let j = c % 3;
                    c /= 3;
                    occ[j] += 1;
                    amp *= f[(j, 0)];
                }
                *proj.entry(occ).or_default() += amp;
            }
            for t in expand_corner_state(n) {
                let class = (crate::ln_factorial(n)
                    - t.m.iter().map(|&k| crate::ln_factorial(k)).sum::<f64>())
                .exp();
                let brute = proj[&t.m] / class.sqrt();
                assert!(
                    (brute - C64::new(t.amplitude, 0.0)).norm() < 1e-8,
                    "N={n} m={:?}",
                    t.m
                );
            }
        }
    }

    #[test]
    fn corner_expansion_peaks_at_equal_occupation() {
        let nine = expand_corner_state(9);
        let best = nine
            .iter()
            .max_by(|a, b| a.amplitude.partial_cmp(&b.amplitude).unwrap())
            .unwrap();
        assert_eq!(best.m, [3, 3, 3]);
    }

    #[test]
    fn parseval() {
        for n in 0..=30 {
            let total: f64 = expand_corner_state(n)
                .iter()
                .map(|t| t.amplitude * t.amplitude)
                .sum();
            assert!((total - 1.0).abs() < 1e-10, "N = {n}");
        }
    }

    #[test]
    fn dispersion_relations() {
        assert_eq!(dispersion(2, 2, Sigma::E, 1.0), (0.0, 0.0));
        let (e, p) = dispersion(0, 1, Sigma::E, 1.0);
        assert!((e - 3f64.sqrt()).abs() < 1e-15 && (p - 2.0 * PI / 3.0).abs() < 1e-15);
        let params = ModelParams::with_kappa(0.4);
        for sigma in [Sigma::G, Sigma::E] {
            let vg = group_velocity(&params, sigma);
            for (m1, m2) in [(0, 3), (5, 1), (2, 9)] {
                let (e, p) = dispersion(m1, m2, sigma, params.kappa);
                assert!((e / p - vg).abs() < 1e-14);
                let eig = normal_mode_energy([7, m1, m2], sigma, params.kappa);
                assert!((e - eig).abs() < 1e-13);
            }
            assert!((vg * params.transfer_time().unwrap() - sigma.z()).abs() < 1e-14);
        }
    }

    #[test]
    fn group_velocity_values() {
        let p = ModelParams::with_kappa(1.0);
        assert!((group_velocity(&p, Sigma::E) - 0.826_993_343_132_688_2).abs() < 1e-12);
        assert!((group_velocity(&p, Sigma::G) + 0.826_993_343_132_688_2).abs() < 1e-12);
        let p80 = ModelParams::with_transfer_time(80.0);
        assert!((group_velocity(&p80, Sigma::E) - 1.0 / 80.0).abs() < 1e-15);
    }
}
