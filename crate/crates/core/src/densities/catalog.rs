use std::sync::Arc;

use super::{make_fat_cantor, make_fstar, Cauchy, Density, Laplace, Normal, StudentT3, UniformOnUnion};
use crate::error::{Error, Result};

/// Truncation level used for the catalog entry `fstar`.
pub const FSTAR_N_MAX: usize = 50;
/// Depth used for the catalog entry `fat-cantor`.
pub const FAT_CANTOR_DEPTH: u32 = 8;

pub const CATALOG_NAMES: [&str; 8] = [
    "normal",
    "normal-2d",
    "laplace",
    "student-t3",
    "cauchy",
    "fstar",
    "fat-cantor",
    "uniform",
];

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub density: Arc<dyn Density>,
}

impl CatalogEntry {
    /// Continuous, strictly positive and bounded: sufficient for the
    /// finite log-moment class.
    pub fn ent_eligible(&self) -> bool {
        let r = self.density.regularity();
        r.continuous && r.strictly_positive && r.bounded
    }
}

pub fn by_name(name: &str) -> Result<Arc<dyn Density>> {
    Ok(match name {
        "normal" => Arc::new(Normal::standard(1)),
        "normal-2d" => Arc::new(Normal::standard(2)),
        "laplace" => Arc::new(Laplace),
        "student-t3" => Arc::new(StudentT3),
        "cauchy" => Arc::new(Cauchy),
        "fstar" => Arc::new(make_fstar(FSTAR_N_MAX)?),
        "fat-cantor" => Arc::new(make_fat_cantor(FAT_CANTOR_DEPTH)?.density().clone()),
        "uniform" => Arc::new(UniformOnUnion::interval(0.0, 1.0)?),
        other => return Err(Error::UnknownTarget(other.to_string())),
    })
}

pub fn catalog() -> Vec<CatalogEntry> {
    CATALOG_NAMES
        .iter()
        .map(|&name| CatalogEntry {
            name,
            density: by_name(name).expect("catalog names are valid"),
        })
        .collect()
}
