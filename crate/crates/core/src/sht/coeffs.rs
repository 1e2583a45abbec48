use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Real spherical-harmonic coefficients up to degree `lmax`.
///
/// The real basis is `Ȳ_l^0 = P̄_l^0`, `Ȳ_l^m = √2 P̄_l^m cos mφ` and
/// `Ȳ_l^{-m} = √2 P̄_l^m sin mφ` for `m > 0`, orthonormal on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Coeffs {
    lmax: usize,
    data: Vec<f64>,
}

impl Coeffs {
    pub fn zeros(lmax: usize) -> Self {
        Self {
            lmax,
            data: vec![0.0; (lmax + 1) * (lmax + 1)],
        }
    }

    pub fn from_vec(lmax: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != (lmax + 1) * (lmax + 1) {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients for degree {lmax}, got {}",
                (lmax + 1) * (lmax + 1),
                data.len()
            )));
        }
        Ok(Self { lmax, data })
    }

    /// A single unit coefficient at `(l, m)`.
    pub fn unit(lmax: usize, l: usize, m: i64) -> Self {
        let mut c = Self::zeros(lmax);
        c.set(l, m, 1.0);
        c
    }

    #[inline]
    pub fn index(l: usize, m: i64) -> usize {
        ((l * l + l) as i64 + m) as usize
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, l: usize, m: i64) -> f64 {
        if l > self.lmax {
            0.0
        } else {
            self.data[Self::index(l, m)]
        }
    }

    #[inline]
    pub fn set(&mut self, l: usize, m: i64, v: f64) {
        self.data[Self::index(l, m)] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Iterate `(l, m, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, f64)> + '_ {
        (0..=self.lmax).flat_map(move |l| (-(l as i64)..=l as i64).map(move |m| (l, m, self.data[Self::index(l, m)])))
    }

    /// Copy into a different degree, truncating or zero-padding.
    pub fn resized(&self, lmax: usize) -> Self {
        let mut out = Self::zeros(lmax);
        for l in 0..=lmax.min(self.lmax) {
            let lo = l * l;
            let hi = lo + 2 * l + 1;
            out.data[lo..hi].copy_from_slice(&self.data[lo..hi]);
        }
        out
    }

    /// Sum of squares; equals the squared L² norm of the field.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_scaled(&mut self, other: &Coeffs, s: f64) {
        for l in 0..=self.lmax.min(other.lmax) {
            for k in l * l..(l + 1) * (l + 1) {
                self.data[k] += s * other.data[k];
            }
        }
    }

    /// Complex coefficients `a_l^m` (Condon-Shortley phase) of the same real field.
    pub fn to_complex(&self) -> Vec<ComplexCoeff> {
        let mut out = Vec::with_capacity(self.data.len());
        for l in 0..=self.lmax {
            for m in -(l as i64)..=(l as i64) {
                let (re, im) = if m == 0 {
                    (self.get(l, 0), 0.0)
                } else {
                    let am = m.unsigned_abs() as i64;
                    let sign = if am % 2 == 0 { 1.0 } else { -1.0 };
                    let (r, s) = (self.get(l, am), self.get(l, -am));
                    // a_l^{|m|} = (-1)^m (r - i s)/√2, a_l^{-|m|} = (-1)^m conj(a_l^{|m|})
                    let (re, im) = (sign * r * FRAC_1_SQRT_2, -sign * s * FRAC_1_SQRT_2);
                    if m > 0 {
                        (re, im)
                    } else {
                        (sign * re, -sign * im)
                    }
                };
                out.push(ComplexCoeff { l, m, re, im });
            }
        }
        out
    }

    /// Inverse of [`Coeffs::to_complex`]. Entries missing from the list are zero;
    /// a list violating conjugate symmetry is rejected.
    pub fn from_complex(lmax: usize, list: &[ComplexCoeff]) -> Result<Self> {
        let mut re = vec![0.0; (lmax + 1) * (lmax + 1)];
        let mut im = vec![0.0; (lmax + 1) * (lmax + 1)];
        let mut seen = vec![false; (lmax + 1) * (lmax + 1)];
        for c in list {
            if c.l > lmax {
                return Err(Error::DegreeOutOfRange { max: lmax, got: c.l });
            }
            if c.m.unsigned_abs() as usize > c.l {
                return Err(Error::InvalidArgument(format!("order {} exceeds degree {}", c.m, c.l)));
            }
            let k = Self::index(c.l, c.m);
            re[k] = c.re;
            im[k] = c.im;
            seen[k] = true;
        }
        let mut out = Self::zeros(lmax);
        for l in 0..=lmax {
            let k0 = Self::index(l, 0);
            if im[k0].abs() > 1e-12 * (1.0 + re[k0].abs()) {
                return Err(Error::InvalidArgument(format!(
                    "coefficient (l={l}, m=0) must be real for a real field"
                )));
            }
            out.set(l, 0, re[k0]);
            for m in 1..=(l as i64) {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let (kp, kn) = (Self::index(l, m), Self::index(l, -m));
                let (mut ar, mut ai) = (re[kp], im[kp]);
                if !seen[kp] && seen[kn] {
                    ar = sign * re[kn];
                    ai = -sign * im[kn];
                } else if seen[kp] && seen[kn] {
                    let (br, bi) = (sign * re[kn], -sign * im[kn]);
                    let scale = 1.0 + ar.abs().max(ai.abs());
                    if (br - ar).abs() > 1e-10 * scale || (bi - ai).abs() > 1e-10 * scale {
                        return Err(Error::InvalidArgument(format!(
                            "coefficients (l={l}, m=±{m}) violate conjugate symmetry"
                        )));
                    }
                }
                out.set(l, m, sign * ar * std::f64::consts::SQRT_2);
                out.set(l, -m, -sign * ai * std::f64::consts::SQRT_2);
            }
        }
        Ok(out)
    }
}

/// JSON wire form of one complex coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexCoeff {
    pub l: usize,
    pub m: i64,
    pub re: f64,
    pub im: f64,
}

/// Serialized as the complex coefficient list; the degree bound is the
/// largest `l` present.
impl Serialize for Coeffs {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_complex().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Coeffs {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let list = Vec::<ComplexCoeff>::deserialize(d)?;
        let lmax = list.iter().map(|c| c.l).max().unwrap_or(0);
        Coeffs::from_complex(lmax, &list).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn complex_round_trip(values in proptest::collection::vec(-1.0f64..1.0, 36)) {
            let c = Coeffs::from_vec(5, values).unwrap();
            let z = c.to_complex();
            for e in &z {
                // conjugate symmetry a[l][-m] = (-1)^m conj(a[l][m])
                if e.m < 0 {
                    let p = z.iter().find(|o| o.l == e.l && o.m == -e.m).unwrap();
                    let s = if e.m % 2 == 0 { 1.0 } else { -1.0 };
                    prop_assert!((e.re - s * p.re).abs() < 1e-14);
                    prop_assert!((e.im + s * p.im).abs() < 1e-14);
                }
            }
            let back = Coeffs::from_complex(5, &z).unwrap();
            for (a, b) in c.as_slice().iter().zip(back.as_slice()) {
                prop_assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_asymmetric_list() {
        let list = [
            ComplexCoeff {
                l: 1,
                m: 1,
                re: 1.0,
                im: 0.0,
            },
            ComplexCoeff {
                l: 1,
                m: -1,
                re: 1.0,
                im: 0.0,
            },
        ];
        assert!(Coeffs::from_complex(2, &list).is_err());
    }
}
