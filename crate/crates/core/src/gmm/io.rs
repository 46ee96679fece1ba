use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FiniteGMM, GaussComponent};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureDoc {
    dim: usize,
    components: Vec<ComponentDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDoc {
    weight: f64,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

pub fn mixture_to_string(g: &FiniteGMM) -> String {
    let d = g.dim();
    let doc = MixtureDoc {
        dim: d,
        components: g
            .components()
            .iter()
            .map(|c| ComponentDoc {
                weight: c.weight,
                mean: c.mean.clone(),
                cov: c.cov.chunks(d).map(<[f64]>::to_vec).collect(),
            })
            .collect(),
    };
    crate::json::to_string(&doc)
}

pub fn mixture_from_str(text: &str) -> Result<FiniteGMM> {
    let doc: MixtureDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let d = doc.dim;
    let mut comps = Vec::with_capacity(doc.components.len());
    for (j, c) in doc.components.into_iter().enumerate() {
        if c.mean.len() != d {
            return Err(Error::Validation(format!(
                "components[{j}].mean has length {} but dim is {d}",
                c.mean.len()
            )));
        }
        if c.cov.len() != d || c.cov.iter().any(|row| row.len() != d) {
            return Err(Error::Validation(format!("components[{j}].cov must be {d}x{d}")));
        }
        comps.push(GaussComponent::new(c.weight, c.mean, c.cov.concat()));
    }
    FiniteGMM::new(comps)
}

pub fn write_mixture(g: &FiniteGMM, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mixture_to_string(g))?;
    Ok(())
}

pub fn read_mixture(path: impl AsRef<Path>) -> Result<FiniteGMM> {
    mixture_from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = FiniteGMM::new(vec![
            GaussComponent::new(1.0 / 3.0, vec![0.1, -2.0 / 7.0], vec![1.1, 0.3, 0.3, 0.7]),
            GaussComponent::new(2.0 / 3.0, vec![1e-300, 5.5], vec![2.0, 0.0, 0.0, 1.0 / 9.0]),
        ])
        .unwrap();
        let back = mixture_from_str(&mixture_to_string(&g)).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn parse_error_has_locus() {
        let err = mixture_from_str("{\n  \"dim\": 1,\n  \"components\": [ {\"weight\": 1.0, \"mean\": [0.0], \"cov\": [[1.0]] ,]\n}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_simplex_violation() {
        let text = r#"{"dim":1,"components":[
            {"weight":0.5,"mean":[0.0],"cov":[[1.0]]},
            {"weight":0.6,"mean":[1.0],"cov":[[1.0]]}]}"#;
        assert!(matches!(mixture_from_str(text), Err(Error::Validation(_))));
    }
}
