//! Similarity heads `h(zᵢ, zⱼ)` over encoded feature vectors, with exact gradients.
//!
//! Every head reads a feature vector of length `K`. SIPS uses the last slot as
//! the per-node bias `u`; IPDS splits the slots into a positive part of length
//! `k_plus` followed by a negative part of length `k_minus`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::kernels::{arcosh, check_ball, poincare_distance_unchecked};
use crate::linalg::{axpy, dot, norm_sq, sq_dist};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SimilarityHead {
    Ips,
    Sips,
    /// Inner product minus a trainable constant.
    Csips { gamma: f64 },
    Ipds { k_plus: usize, k_minus: usize },
    Nsd,
    Poincare,
}

/// Head kind without parameters, as named on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Ips,
    Sips,
    Csips,
    Ipds,
    Nsd,
    Poincare,
}

impl HeadKind {
    pub const ALL: [HeadKind; 6] =
        [HeadKind::Ips, HeadKind::Sips, HeadKind::Csips, HeadKind::Ipds, HeadKind::Nsd, HeadKind::Poincare];

    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Ips => "ips",
            HeadKind::Sips => "sips",
            HeadKind::Csips => "csips",
            HeadKind::Ipds => "ipds",
            HeadKind::Nsd => "nsd",
            HeadKind::Poincare => "poincare",
        }
    }

    /// Builds the head for feature dimension `dim`. IPDS takes `k_minus`
    /// (default `dim / 2`) negative slots.
    pub fn build(self, dim: usize, k_minus: Option<usize>) -> Result<SimilarityHead> {
        let head = match self {
            HeadKind::Ips => SimilarityHead::Ips,
            HeadKind::Sips => SimilarityHead::Sips,
            HeadKind::Csips => SimilarityHead::Csips { gamma: 0.0 },
            HeadKind::Ipds => {
                let k_minus = k_minus.unwrap_or(dim / 2);
                SimilarityHead::Ipds { k_plus: dim.saturating_sub(k_minus), k_minus }
            }
            HeadKind::Nsd => SimilarityHead::Nsd,
            HeadKind::Poincare => SimilarityHead::Poincare,
        };
        head.validate(dim)?;
        Ok(head)
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "ips" => Ok(HeadKind::Ips),
            "sips" => Ok(HeadKind::Sips),
            "csips" => Ok(HeadKind::Csips),
            "ipds" => Ok(HeadKind::Ipds),
            "nsd" => Ok(HeadKind::Nsd),
            "poincare" => Ok(HeadKind::Poincare),
            _ => Err(config(format!("unknown head kind {s:?}"))),
        }
    }
}

/// Partial derivatives of a head value.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadGradient {
    pub grad_i: Vec<f64>,
    pub grad_j: Vec<f64>,
    /// Present only for C-SIPS.
    pub grad_gamma: Option<f64>,
}

impl SimilarityHead {
    pub fn kind(&self) -> HeadKind {
        match self {
            SimilarityHead::Ips => HeadKind::Ips,
            SimilarityHead::Sips => HeadKind::Sips,
            SimilarityHead::Csips { .. } => HeadKind::Csips,
            SimilarityHead::Ipds { .. } => HeadKind::Ipds,
            SimilarityHead::Nsd => HeadKind::Nsd,
            SimilarityHead::Poincare => HeadKind::Poincare,
        }
    }

    /// Checks the feature layout against dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(config("feature dimension must be positive"));
        }
        match *self {
            SimilarityHead::Sips if dim < 2 => Err(config("SIPS needs K >= 2 (K-1 feature slots plus the bias slot)")),
            SimilarityHead::Ipds { k_plus, k_minus } => {
                if k_plus == 0 || k_minus == 0 || k_plus + k_minus != dim {
                    Err(config(format!(
                        "IPDS layout k_plus={k_plus}, k_minus={k_minus} does not split K={dim} into two nonempty parts"
                    )))
                } else {
                    Ok(())
                }
            }
            SimilarityHead::Csips { gamma } if !gamma.is_finite() => Err(config("C-SIPS gamma must be finite")),
            _ => Ok(()),
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            SimilarityHead::Csips { gamma } => Some(*gamma),
            _ => None,
        }
    }

    pub fn gamma_mut(&mut self) -> Option<&mut f64> {
        match self {
            SimilarityHead::Csips { gamma } => Some(gamma),
            _ => None,
        }
    }

    fn check(&self, zi: &[f64], zj: &[f64]) -> Result<()> {
        if zi.len() != zj.len() {
            return Err(config(format!("feature lengths differ: {} vs {}", zi.len(), zj.len())));
        }
        self.validate(zi.len())?;
        if let SimilarityHead::Poincare = self {
            check_ball(zi, "first")?;
            check_ball(zj, "second")?;
        }
        Ok(())
    }

    /// `h(zᵢ, zⱼ)`
    pub fn value(&self, zi: &[f64], zj: &[f64]) -> Result<f64> {
        self.check(zi, zj)?;
        Ok(self.value_unchecked(zi, zj))
    }

    pub(crate) fn value_unchecked(&self, zi: &[f64], zj: &[f64]) -> f64 {
        match *self {
            SimilarityHead::Ips => dot(zi, zj),
            SimilarityHead::Sips => {
                let k = zi.len() - 1;
                dot(&zi[..k], &zj[..k]) + (zi[k] + zj[k])
            }
            SimilarityHead::Csips { gamma } => dot(zi, zj) - gamma,
            SimilarityHead::Ipds { k_plus, .. } => {
                dot(&zi[..k_plus], &zj[..k_plus]) - dot(&zi[k_plus..], &zj[k_plus..])
            }
            SimilarityHead::Nsd => -sq_dist(zi, zj),
            SimilarityHead::Poincare => -poincare_distance_unchecked(zi, zj),
        }
    }

    /// Exact partial derivatives of [`value`](Self::value).
    pub fn gradient(&self, zi: &[f64], zj: &[f64]) -> Result<HeadGradient> {
        self.check(zi, zj)?;
        let mut grad_i = vec![0.0; zi.len()];
        let mut grad_j = vec![0.0; zj.len()];
        let grad_gamma = self.accumulate_gradient(zi, zj, 1.0, &mut grad_i, &mut grad_j);
        Ok(HeadGradient { grad_i, grad_j, grad_gamma })
    }

    /// Adds `scale · ∂h/∂zᵢ` to `gi` and `scale · ∂h/∂zⱼ` to `gj`; returns
    /// `scale · ∂h/∂γ` for C-SIPS. Inputs must already be validated.
    ///
    /// The Poincaré distance has a cusp at `zᵢ = zⱼ`; its gradient there is
    /// taken to be zero.
    pub(crate) fn accumulate_gradient(
        &self,
        zi: &[f64],
        zj: &[f64],
        scale: f64,
        gi: &mut [f64],
        gj: &mut [f64],
    ) -> Option<f64> {
        match *self {
            SimilarityHead::Ips => {
                axpy(scale, zj, gi);
                axpy(scale, zi, gj);
                None
            }
            SimilarityHead::Sips => {
                let k = zi.len() - 1;
                axpy(scale, &zj[..k], &mut gi[..k]);
                axpy(scale, &zi[..k], &mut gj[..k]);
                gi[k] += scale;
                gj[k] += scale;
                None
            }
            SimilarityHead::Csips { .. } => {
                axpy(scale, zj, gi);
                axpy(scale, zi, gj);
                Some(-scale)
            }
            SimilarityHead::Ipds { k_plus, .. } => {
                axpy(scale, &zj[..k_plus], &mut gi[..k_plus]);
                axpy(scale, &zi[..k_plus], &mut gj[..k_plus]);
                axpy(-scale, &zj[k_plus..], &mut gi[k_plus..]);
                axpy(-scale, &zi[k_plus..], &mut gj[k_plus..]);
                None
            }
            SimilarityHead::Nsd => {
                for t in 0..zi.len() {
                    let d = zi[t] - zj[t];
                    gi[t] -= 2.0 * scale * d;
                    gj[t] += 2.0 * scale * d;
                }
                None
            }
            SimilarityHead::Poincare => {
                poincare_gradient(zi, zj, scale, gi, gj);
                None
            }
        }
    }
}

/// Gradient of `−d(a, b)` where `d = arcosh(z)`,
/// `z = 1 + 2‖a − b‖² / ((1 − ‖a‖²)(1 − ‖b‖²))`.
fn poincare_gradient(a: &[f64], b: &[f64], scale: f64, ga: &mut [f64], gb: &mut [f64]) {
    let d2 = sq_dist(a, b);
    if d2 == 0.0 {
        return;
    }
    let alpha = 1.0 - norm_sq(a);
    let beta = 1.0 - norm_sq(b);
    let z = 1.0 + 2.0 * d2 / (alpha * beta);
    // z² − 1 = (z − 1)(z + 1) keeps precision when z is close to 1.
    let zm1 = 2.0 * d2 / (alpha * beta);
    let dd_dz = 1.0 / (zm1 * (z + 1.0)).sqrt();
    let c = -scale * dd_dz;
    let inv = 4.0 / (alpha * beta);
    for t in 0..a.len() {
        let diff = a[t] - b[t];
        // ∂z/∂a = 4(a − b)/(αβ) + 4‖a − b‖² a / (α²β), symmetric for b.
        ga[t] += c * (inv * diff + inv * d2 * a[t] / alpha);
        gb[t] += c * (-inv * diff + inv * d2 * b[t] / beta);
    }
    debug_assert!((arcosh(z) - poincare_distance_unchecked(a, b)).abs() < 1e-9);
}

/// Rewrites a SIPS feature `(f, u)` as an IPDS pair `(f, u, 1)` / `(u − 1)` so that
/// `⟨f⁺ᵢ, f⁺ⱼ⟩ − r⁻ᵢ r⁻ⱼ = ⟨fᵢ, fⱼ⟩ + uᵢ + uⱼ`.
pub fn sips_reduction_of_ipds(f: &[f64], u: f64) -> (Vec<f64>, Vec<f64>) {
    let mut plus = Vec::with_capacity(f.len() + 2);
    plus.extend_from_slice(f);
    plus.push(u);
    plus.push(1.0);
    (plus, vec![u - 1.0])
}

/// Concatenates the reduction into a single IPDS feature vector together with the head.
pub fn ipds_feature_from_sips(f: &[f64], u: f64) -> (SimilarityHead, Vec<f64>) {
    let (mut plus, minus) = sips_reduction_of_ipds(f, u);
    let head = SimilarityHead::Ipds { k_plus: plus.len(), k_minus: minus.len() };
    plus.extend(minus);
    (head, plus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sips_with_zero_bias_is_ips() {
        let zi = [0.3, -1.2, 0.0];
        let zj = [2.0, 0.5, 0.0];
        let s = SimilarityHead::Sips.value(&zi, &zj).unwrap();
        let i = SimilarityHead::Ips.value(&zi[..2], &zj[..2]).unwrap();
        assert_eq!(s, i);
    }

    #[test]
    fn sips_expresses_nsd() {
        let r2 = 2f64.sqrt();
        let v = SimilarityHead::Sips.value(&[r2, 0.0, -1.0], &[0.0, r2, -1.0]).unwrap();
        assert_abs_diff_eq!(v, -2.0, epsilon = 1e-15);
    }

    #[test]
    fn csips_zero_gamma_and_ipds_zero_negative_part() {
        let zi = [0.3, -1.2];
        let zj = [2.0, 0.5];
        let ips = SimilarityHead::Ips.value(&zi, &zj).unwrap();
        assert_eq!(SimilarityHead::Csips { gamma: 0.0 }.value(&zi, &zj).unwrap(), ips);
        let head = SimilarityHead::Ipds { k_plus: 2, k_minus: 1 };
        assert_eq!(head.value(&[0.3, -1.2, 0.0], &[2.0, 0.5, 0.0]).unwrap(), ips);
    }

    #[test]
    fn simple_gradients() {
        let zi = [0.3, -1.2];
        let zj = [2.0, 0.5];
        let g = SimilarityHead::Ips.gradient(&zi, &zj).unwrap();
        assert_eq!(g.grad_i, zj.to_vec());
        assert_eq!(g.grad_gamma, None);
        let g = SimilarityHead::Nsd.gradient(&zi, &zj).unwrap();
        assert_eq!(g.grad_i, vec![-2.0 * (0.3 - 2.0), -2.0 * (-1.2 - 0.5)]);
        let g = SimilarityHead::Csips { gamma: 0.7 }.gradient(&zi, &zj).unwrap();
        assert_eq!(g.grad_gamma, Some(-1.0));
    }

    #[test]
    fn poincare_gradient_zero_at_cusp() {
        let g = SimilarityHead::Poincare.gradient(&[0.1, 0.2], &[0.1, 0.2]).unwrap();
        assert_eq!(g.grad_i, vec![0.0, 0.0]);
        assert_eq!(g.grad_j, vec![0.0, 0.0]);
    }

    #[test]
    fn layout_errors() {
        assert!(matches!(SimilarityHead::Sips.value(&[1.0], &[1.0]), Err(Error::Config(_))));
        let bad = SimilarityHead::Ipds { k_plus: 2, k_minus: 0 };
        assert!(bad.value(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        let mismatch = SimilarityHead::Ipds { k_plus: 2, k_minus: 2 };
        assert!(mismatch.value(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(matches!(
            SimilarityHead::Poincare.value(&[0.9, 0.9], &[0.0, 0.0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(SimilarityHead::Ips.value(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn reduction_examples() {
        let (head, a) = ipds_feature_from_sips(&[0.0], 0.0);
        assert_eq!(head.value(&a, &a).unwrap(), 0.0);

        let (head, a) = ipds_feature_from_sips(&[1.0], 2.0);
        let (_, b) = ipds_feature_from_sips(&[3.0], -1.0);
        assert_eq!(head.value(&a, &b).unwrap(), 4.0);
        assert_eq!(SimilarityHead::Sips.value(&[1.0, 2.0], &[3.0, -1.0]).unwrap(), 4.0);
    }

    #[test]
    fn head_kind_parsing() {
        for k in HeadKind::ALL {
            assert_eq!(k.as_str().parse::<HeadKind>().unwrap(), k);
        }
        assert!("foo".parse::<HeadKind>().is_err());
        assert_eq!(HeadKind::Ipds.build(5, None).unwrap(), SimilarityHead::Ipds { k_plus: 3, k_minus: 2 });
        assert!(HeadKind::Sips.build(1, None).is_err());
    }
}
