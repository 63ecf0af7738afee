//! Closed-form solution of the doubly periodic Poisson problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Sin,
    Cos,
}

/// `amplitude * sin|cos(k_z Z + k_zeta zeta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k_z: f64,
    pub k_zeta: f64,
    pub amplitude: f64,
    pub kind: ModeKind,
}

impl FourierMode {
    pub fn eval(&self, z: f64, zeta: f64) -> f64 {
        let arg = self.k_z * z + self.k_zeta * zeta;
        self.amplitude
            * match self.kind {
                ModeKind::Sin => arg.sin(),
                ModeKind::Cos => arg.cos(),
            }
    }

    fn k2(&self) -> f64 {
        self.k_z * self.k_z + self.k_zeta * self.k_zeta
    }
}

/// Sum of modes solving `lap phi = rho` for the source modes it was built
/// from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierSolution {
    pub source: Vec<FourierMode>,
    pub modes: Vec<FourierMode>,
}

impl FourierSolution {
    pub fn phi(&self, z: f64, zeta: f64) -> f64 {
        self.modes.iter().map(|m| m.eval(z, zeta)).sum()
    }

    pub fn rho(&self, z: f64, zeta: f64) -> f64 {
        self.source.iter().map(|m| m.eval(z, zeta)).sum()
    }
}

/// Each source mode maps to the same mode scaled by `-1 / |k|^2`.
pub fn fourier_oracle_2d(rho_modes: &[FourierMode]) -> Result<FourierSolution> {
    let modes = rho_modes
        .iter()
        .map(|m| {
            if m.k2() == 0.0 {
                return Err(Error::ZeroMode);
            }
            Ok(FourierMode {
                amplitude: -m.amplitude / m.k2(),
                ..*m
            })
        })
        .collect::<Result<_>>()?;
    Ok(FourierSolution {
        source: rho_modes.to_vec(),
        modes,
    })
}

/// Modes of `rho = sin[n (Z - zeta)] (1 + sin Z) / 2`:
/// `sin(nZ - n zeta)/2 + cos((n-1)Z - n zeta)/4 - cos((n+1)Z - n zeta)/4`.
pub fn sheared_wave_modes(n: i32) -> Vec<FourierMode> {
    let n = n as f64;
    vec![
        FourierMode {
            k_z: n,
            k_zeta: -n,
            amplitude: 0.5,
            kind: ModeKind::Sin,
        },
        FourierMode {
            k_z: n - 1.0,
            k_zeta: -n,
            amplitude: 0.25,
            kind: ModeKind::Cos,
        },
        FourierMode {
            k_z: n + 1.0,
            k_zeta: -n,
            amplitude: -0.25,
            kind: ModeKind::Cos,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_sine() {
        let s = fourier_oracle_2d(&[FourierMode {
            k_z: 1.0,
            k_zeta: 0.0,
            amplitude: 1.0,
            kind: ModeKind::Sin,
        }])
        .unwrap();
        assert_abs_diff_eq!(s.phi(0.7, 1.3), -(0.7f64).sin(), epsilon = 1e-15);
    }

    #[test]
    fn zero_mode_rejected() {
        let m = FourierMode {
            k_z: 0.0,
            k_zeta: 0.0,
            amplitude: 1.0,
            kind: ModeKind::Cos,
        };
        assert!(matches!(fourier_oracle_2d(&[m]), Err(Error::ZeroMode)));
    }

    #[test]
    fn sheared_wave_expansion_matches_product_form() {
        let s = fourier_oracle_2d(&sheared_wave_modes(10)).unwrap();
        for (z, zeta) in [(0.1f64, 0.2f64), (2.0, 5.5), (4.4, 1.1)] {
            let direct = (10.0 * (z - zeta)).sin() * (1.0 + z.sin()) / 2.0;
            assert_abs_diff_eq!(s.rho(z, zeta), direct, epsilon = 1e-13);
        }
    }
}
