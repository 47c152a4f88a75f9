//! Physical egg-quality indices and the label thresholds derived from them.
//!
//! All functions here are pure. Dimensions are millimetres and weights are
//! grams unless a file schema says otherwise.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower Haugh unit bound of grade AA.
pub const HU_AA: f64 = 72.0;
/// Lower Haugh unit bound of grade A.
pub const HU_A: f64 = 60.0;
/// Lower Haugh unit bound of grade B.
pub const HU_B: f64 = 31.0;
/// Yolk index strictly above this is `Fresh`.
pub const YI_FRESH: f64 = 38.0;
/// Yolk index at or above this (and at most [`YI_FRESH`]) is `ModeratelyFresh`.
pub const YI_MODERATE: f64 = 34.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("invalid measurement: {field} = {value} ({reason})")]
    InvalidMeasurement {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// The Haugh unit logarithm argument `H + 7.6 - 1.7 W^0.37` is not positive.
    #[error(
        "degenerate albumen measurement: log10 argument {argument:.4} <= 0 \
         (albumen height {albumen_height}, weight {weight})"
    )]
    HaughDomain {
        albumen_height: f64,
        weight: f64,
        argument: f64,
    },
}

/// Retail channel an egg was bought from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Market {
    /// Wholesale market.
    WM,
    /// Super shop.
    SS,
    /// Grocery shop.
    GS,
    /// Open shop.
    OS,
}

impl Market {
    pub const ALL: [Market; 4] = [Market::WM, Market::SS, Market::GS, Market::OS];

    pub fn as_str(self) -> &'static str {
        match self {
            Market::WM => "WM",
            Market::SS => "SS",
            Market::GS => "GS",
            Market::OS => "OS",
        }
    }
}

impl fmt::Display for Market {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Market {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "WM" => Ok(Market::WM),
            "SS" => Ok(Market::SS),
            "GS" => Ok(Market::GS),
            "OS" => Ok(Market::OS),
            other => Err(format!(
                "unknown market `{other}` (expected WM, SS, GS or OS)"
            )),
        }
    }
}

/// One physical egg record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EggMeasurement {
    pub egg_id: String,
    pub market: Market,
    /// grams
    pub weight: f64,
    pub width: f64,
    pub length: f64,
    pub yolk_height: f64,
    pub yolk_diameter: f64,
    pub albumen_height: f64,
}

impl EggMeasurement {
    /// Checks the sign constraints of every field.
    pub fn validate(&self) -> Result<(), DomainError> {
        positive("weight", self.weight)?;
        positive("width", self.width)?;
        positive("length", self.length)?;
        non_negative("yolk_height", self.yolk_height)?;
        positive("yolk_diameter", self.yolk_diameter)?;
        non_negative("albumen_height", self.albumen_height)?;
        Ok(())
    }

    /// Computes all three indices, failing on the first invalid input.
    pub fn derived(&self) -> Result<DerivedMetrics, DomainError> {
        self.validate()?;
        Ok(DerivedMetrics {
            shape_index: shape_index(self.width, self.length)?,
            yolk_index: yolk_index(self.yolk_height, self.yolk_diameter)?,
            haugh_unit: haugh_unit(self.albumen_height, self.weight)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedMetrics {
    pub shape_index: f64,
    pub yolk_index: f64,
    pub haugh_unit: f64,
}

impl DerivedMetrics {
    pub fn grade(&self) -> Result<Grade4, DomainError> {
        grade_label(self.haugh_unit)
    }

    pub fn freshness(&self) -> Result<Freshness3, DomainError> {
        freshness_label(self.yolk_index)
    }
}

fn positive(field: &'static str, value: f64) -> Result<f64, DomainError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(DomainError::InvalidMeasurement {
            field,
            value,
            reason: "must be finite and > 0",
        })
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<f64, DomainError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(DomainError::InvalidMeasurement {
            field,
            value,
            reason: "must be finite and >= 0",
        })
    }
}

fn finite(field: &'static str, value: f64) -> Result<f64, DomainError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(DomainError::InvalidMeasurement {
            field,
            value,
            reason: "must be finite",
        })
    }
}

/// `100 * width / length`.
///
/// Values above 100 usually mean the two axes were swapped at measurement
/// time; they are returned unchanged and reported through `log::warn!`.
pub fn shape_index(width: f64, length: f64) -> Result<f64, DomainError> {
    let width = positive("width", width)?;
    let length = positive("length", length)?;
    let si = 100.0 * width / length;
    if si > 100.0 {
        log::warn!(
            "shape index {si:.2} > 100 (width {width} > length {length}); possible axis swap"
        );
    }
    Ok(si)
}

/// `100 * yolk_height / yolk_diameter`.
pub fn yolk_index(yolk_height: f64, yolk_diameter: f64) -> Result<f64, DomainError> {
    let height = non_negative("yolk_height", yolk_height)?;
    let diameter = positive("yolk_diameter", yolk_diameter)?;
    Ok(100.0 * height / diameter)
}

/// Haugh unit `100 * log10(H + 7.6 - 1.7 * W^0.37)` for albumen height `H`
/// (mm) and egg weight `W` (g).
pub fn haugh_unit(albumen_height: f64, weight: f64) -> Result<f64, DomainError> {
    let h = non_negative("albumen_height", albumen_height)?;
    let w = positive("weight", weight)?;
    let argument = h + 7.6 - 1.7 * w.powf(0.37);
    if argument <= 0.0 {
        return Err(DomainError::HaughDomain {
            albumen_height: h,
            weight: w,
            argument,
        });
    }
    Ok(100.0 * argument.log10())
}

/// Four-level Haugh unit grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Grade4 {
    AA,
    A,
    B,
    C,
}

/// Binary grade used for classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Grade2 {
    High,
    Low,
}

/// Three-level yolk index freshness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Freshness3 {
    Fresh,
    ModeratelyFresh,
    Old,
}

/// Binary freshness used for classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Freshness2 {
    Fresh,
    Old,
}

/// AA: HU >= 72, A: [60, 72), B: [31, 60), C: HU < 31.
pub fn grade_label(hu: f64) -> Result<Grade4, DomainError> {
    let hu = finite("haugh_unit", hu)?;
    Ok(if hu >= HU_AA {
        Grade4::AA
    } else if hu >= HU_A {
        Grade4::A
    } else if hu >= HU_B {
        Grade4::B
    } else {
        Grade4::C
    })
}

/// Fresh: YI > 38, ModeratelyFresh: [34.5, 38], Old: YI < 34.5.
pub fn freshness_label(yi: f64) -> Result<Freshness3, DomainError> {
    let yi = finite("yolk_index", yi)?;
    Ok(if yi > YI_FRESH {
        Freshness3::Fresh
    } else if yi >= YI_MODERATE {
        Freshness3::ModeratelyFresh
    } else {
        Freshness3::Old
    })
}

impl Grade4 {
    pub fn collapse(self) -> Grade2 {
        match self {
            Grade4::AA | Grade4::A => Grade2::High,
            Grade4::B | Grade4::C => Grade2::Low,
        }
    }
}

impl Freshness3 {
    pub fn collapse(self) -> Freshness2 {
        match self {
            Freshness3::Fresh | Freshness3::ModeratelyFresh => Freshness2::Fresh,
            Freshness3::Old => Freshness2::Old,
        }
    }
}

impl fmt::Display for Grade2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grade2::High => "High",
            Grade2::Low => "Low",
        })
    }
}

impl fmt::Display for Freshness2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Freshness2::Fresh => "Fresh",
            Freshness2::Old => "Old",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn shape_index_examples() {
        assert_eq!(shape_index(42.0, 56.0).unwrap(), 75.0);
        assert_eq!(shape_index(50.0, 50.0).unwrap(), 100.0);
        // axis swap is accepted
        assert!(shape_index(60.0, 50.0).unwrap() > 100.0);
        assert!(shape_index(0.0, 50.0).is_err());
        assert!(shape_index(40.0, -1.0).is_err());
    }

    #[test]
    fn yolk_index_examples() {
        assert_eq!(yolk_index(18.0, 45.0).unwrap(), 40.0);
        assert_eq!(yolk_index(0.0, 40.0).unwrap(), 0.0);
        assert!(matches!(
            yolk_index(10.0, 0.0),
            Err(DomainError::InvalidMeasurement {
                field: "yolk_diameter",
                ..
            })
        ));
        assert!(yolk_index(10.0, -3.0).is_err());
    }

    #[test]
    fn haugh_unit_examples() {
        // 40-digit reference: 100 * log10(6.86669954037663512...)
        let hu = haugh_unit(7.0, 60.0).unwrap();
        assert!(rel_eq(hu, 83.674_804_480_046_15, 1e-12), "{hu}");
        assert!((hu - 83.68).abs() < 0.01);
        match haugh_unit(0.1, 60.0) {
            Err(DomainError::HaughDomain { argument, .. }) => {
                assert!(
                    (argument + 0.033_300_459_623_364_87).abs() < 1e-12,
                    "{argument}"
                )
            }
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn freshness_boundaries() {
        assert_eq!(freshness_label(38.01).unwrap(), Freshness3::Fresh);
        assert_eq!(freshness_label(38.0).unwrap(), Freshness3::ModeratelyFresh);
        assert_eq!(freshness_label(34.5).unwrap(), Freshness3::ModeratelyFresh);
        assert_eq!(freshness_label(34.49).unwrap(), Freshness3::Old);
        assert!(freshness_label(f64::NAN).is_err());
    }

    #[test]
    fn grade_boundaries() {
        assert_eq!(grade_label(72.0).unwrap(), Grade4::AA);
        assert_eq!(grade_label(71.99).unwrap(), Grade4::A);
        assert_eq!(grade_label(60.0).unwrap(), Grade4::A);
        assert_eq!(grade_label(59.99).unwrap(), Grade4::B);
        assert_eq!(grade_label(31.0).unwrap(), Grade4::B);
        assert_eq!(grade_label(30.99).unwrap(), Grade4::C);
        assert!(grade_label(f64::NAN).is_err());
    }

    #[test]
    fn collapse() {
        assert_eq!(Grade4::AA.collapse(), Grade2::High);
        assert_eq!(Grade4::A.collapse(), Grade2::High);
        assert_eq!(Grade4::B.collapse(), Grade2::Low);
        assert_eq!(Grade4::C.collapse(), Grade2::Low);
        assert_eq!(Freshness3::Fresh.collapse(), Freshness2::Fresh);
        assert_eq!(Freshness3::ModeratelyFresh.collapse(), Freshness2::Fresh);
        assert_eq!(Freshness3::Old.collapse(), Freshness2::Old);
    }

    #[test]
    fn measurement_validation() {
        let mut egg = EggMeasurement {
            egg_id: "e1".into(),
            market: Market::GS,
            weight: 60.0,
            width: 44.0,
            length: 57.0,
            yolk_height: 16.0,
            yolk_diameter: 40.0,
            albumen_height: 7.0,
        };
        let d = egg.derived().unwrap();
        assert_eq!(d.yolk_index, 40.0);
        egg.yolk_diameter = 0.0;
        assert!(egg.derived().is_err());
        egg.yolk_diameter = 40.0;
        egg.albumen_height = -0.1;
        assert!(egg.validate().is_err());
    }

    proptest! {
        #[test]
        fn ratio_indices_are_scale_invariant(a in 0.1f64..100.0, b in 0.1f64..100.0, c in 1e-3f64..1e3) {
            prop_assert!(rel_eq(shape_index(a, b).unwrap(), shape_index(a * c, b * c).unwrap(), 1e-9));
            prop_assert!(rel_eq(yolk_index(a, b).unwrap(), yolk_index(a * c, b * c).unwrap(), 1e-9));
        }

        #[test]
        fn haugh_unit_monotone(h1 in 0.0f64..15.0, dh in 1e-6f64..5.0, w in 30.0f64..90.0, dw in 1e-3f64..10.0) {
            if let (Ok(lo), Ok(hi)) = (haugh_unit(h1, w), haugh_unit(h1 + dh, w)) {
                prop_assert!(hi > lo);
            }
            if let (Ok(light), Ok(heavy)) = (haugh_unit(h1, w), haugh_unit(h1, w + dw)) {
                prop_assert!(light > heavy);
            }
        }

        #[test]
        fn collapsed_grade_separates_hu(a in -50.0f64..150.0, b in -50.0f64..150.0) {
            let ga = grade_label(a).unwrap().collapse();
            let gb = grade_label(b).unwrap().collapse();
            if ga == Grade2::High && gb == Grade2::Low {
                prop_assert!(a > b);
            }
        }

        #[test]
        fn thresholds_partition_exhaustively(x in -10.0f64..120.0) {
            let probes = [x, HU_AA - 1e-9, HU_AA + 1e-9, HU_A - 1e-9, HU_A + 1e-9, HU_B - 1e-9, HU_B + 1e-9];
            for p in probes {
                let g = grade_label(p).unwrap();
                let expected = if p >= 72.0 { Grade4::AA } else if p >= 60.0 { Grade4::A } else if p >= 31.0 { Grade4::B } else { Grade4::C };
                prop_assert_eq!(g, expected);
            }
            let probes = [x, YI_FRESH - 1e-9, YI_FRESH + 1e-9, YI_MODERATE - 1e-9, YI_MODERATE + 1e-9];
            for p in probes {
                let f = freshness_label(p).unwrap();
                let expected = if p > 38.0 { Freshness3::Fresh } else if p >= 34.5 { Freshness3::ModeratelyFresh } else { Freshness3::Old };
                prop_assert_eq!(f, expected);
            }
        }
    }
}
