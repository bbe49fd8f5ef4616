use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact SR scale factor `hr_width / lr_width`.
///
/// Serialized as `"p"` for integral factors and `"p/q"` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scale(Ratio<u32>);

impl Scale {
    pub fn new(numer: u32, denom: u32) -> Result<Self> {
        if numer == 0 || denom == 0 {
            return Err(Error::InvalidScale(format!("{numer}/{denom} is not a positive ratio")));
        }
        Ok(Scale(Ratio::new(numer, denom)))
    }

    pub fn integer(k: u32) -> Result<Self> {
        Scale::new(k, 1)
    }

    pub fn numer(&self) -> u32 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u32 {
        *self.0.denom()
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `log2` of the factor, the scalar fed to the scale embedder.
    pub fn log2(&self) -> f64 {
        (self.numer() as f64).log2() - (self.denom() as f64).log2()
    }

    pub fn is_integer(&self) -> bool {
        self.denom() == 1
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidScale(format!("cannot parse scale {s:?}"));
        let (n, d) = match s.trim().split_once('/') {
            Some((n, d)) => (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => (s.trim().parse().map_err(|_| bad())?, 1),
        };
        Scale::new(n, d)
    }
}

impl Serialize for Scale {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scale {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Scale factor of an SR image from its width and the width of its LR source.
pub fn derive_scale(hr_width: u32, lr_width: u32) -> Result<Scale> {
    if lr_width == 0 {
        return Err(Error::InvalidRecord("lr_width must be at least 1".into()));
    }
    if hr_width < lr_width {
        return Err(Error::InvalidRecord(format!(
            "hr_width {hr_width} is smaller than lr_width {lr_width}"
        )));
    }
    Scale::new(hr_width, lr_width)
}
