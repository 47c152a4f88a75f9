//! Reference output widths of the supported image backbones and the PCA
//! widths reported for them on the egg dataset.

use serde::Serialize;

use crate::dataset::{FeatureManifest, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Backbone {
    pub name: &'static str,
    /// Width of the globally pooled feature vector.
    pub extracted: usize,
    /// Components retained at 99% explained variance.
    pub reference_pca: usize,
}

pub const BACKBONES: [Backbone; 12] = [
    Backbone {
        name: "InceptionResNetV2",
        extracted: 1536,
        reference_pca: 125,
    },
    Backbone {
        name: "Xception",
        extracted: 2048,
        reference_pca: 156,
    },
    Backbone {
        name: "ResNet101",
        extracted: 2048,
        reference_pca: 129,
    },
    Backbone {
        name: "ResNet152",
        extracted: 2048,
        reference_pca: 131,
    },
    Backbone {
        name: "MobileNetV2",
        extracted: 1280,
        reference_pca: 163,
    },
    Backbone {
        name: "DenseNet169",
        extracted: 1664,
        reference_pca: 166,
    },
    Backbone {
        name: "InceptionV3",
        extracted: 2048,
        reference_pca: 160,
    },
    Backbone {
        name: "ResNet152V2",
        extracted: 2048,
        reference_pca: 74,
    },
    Backbone {
        name: "EfficientNetB7",
        extracted: 2560,
        reference_pca: 104,
    },
    Backbone {
        name: "ConvNeXtTiny",
        extracted: 768,
        reference_pca: 138,
    },
    Backbone {
        name: "ConvNeXtLarge",
        extracted: 1536,
        reference_pca: 132,
    },
    Backbone {
        name: "DenseNet201",
        extracted: 1920,
        reference_pca: 157,
    },
];

/// Case-insensitive lookup.
pub fn backbone(name: &str) -> Option<&'static Backbone> {
    BACKBONES.iter().find(|b| b.name.eq_ignore_ascii_case(name))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionCheck {
    pub extractor: String,
    pub expected: Option<usize>,
    pub manifest: Option<usize>,
    pub found: usize,
    pub ok: bool,
    pub message: String,
}

/// Compares a feature matrix's width with the known backbone width and the
/// manifest's declared width.
pub fn check_dimensions(
    extractor: &str,
    matrix: &FeatureMatrix,
    manifest: Option<&FeatureManifest>,
) -> DimensionCheck {
    let expected = backbone(extractor).map(|b| b.extracted);
    let declared = manifest.map(|m| m.dimension);
    let found = matrix.ncols();
    let mut problems = Vec::new();
    match expected {
        None => problems.push(format!("unknown backbone `{extractor}`")),
        Some(e) if e != found => problems.push(format!("expected {e} columns, found {found}")),
        _ => {}
    }
    if let Some(d) = declared {
        if d != found {
            problems.push(format!("manifest declares {d} columns, found {found}"));
        }
    }
    let ok = problems.is_empty();
    DimensionCheck {
        extractor: extractor.to_string(),
        expected,
        manifest: declared,
        found,
        ok,
        message: if ok {
            format!("{found} columns")
        } else {
            problems.join("; ")
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureKind;
    use ndarray::Array2;

    fn matrix(d: usize) -> FeatureMatrix {
        FeatureMatrix::new(
            vec!["a".into()],
            (0..d).map(|j| format!("f{j}")).collect(),
            Array2::zeros((1, d)),
            FeatureKind::Image,
        )
        .unwrap()
    }

    #[test]
    fn lookup_and_check() {
        assert_eq!(backbone("resnet152v2").unwrap().reference_pca, 74);
        assert!(check_dimensions("DenseNet169", &matrix(1664), None).ok);
        let bad = check_dimensions("DenseNet169", &matrix(1663), None);
        assert!(!bad.ok);
        let manifest = FeatureManifest {
            extractor: "ConvNeXtTiny".into(),
            dimension: 700,
            weights: None,
        };
        assert!(!check_dimensions("ConvNeXtTiny", &matrix(768), Some(&manifest)).ok);
        assert!(!check_dimensions("VGG16", &matrix(4096), None).ok);
    }

    #[test]
    fn pca_never_exceeds_extracted() {
        for b in BACKBONES {
            assert!(b.reference_pca < b.extracted);
        }
    }
}
