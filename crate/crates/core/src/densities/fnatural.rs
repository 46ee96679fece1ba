use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Exact parameters of the tent comb at scale `n`.
///
/// `w = e^{-n⁴}`, `N = ⌈e^{n⁴}/(32n⁴)⌉`, tent centers `c_k = n + (4k+2)w`,
/// supports `S_k = [n + (4k+1)w, n + (4k+3)w]` and the hull `I = [n, n + 4Nw]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FNaturalParams {
    pub n: u32,
    pub w: f64,
    pub log_w: f64,
    pub count: u64,
}

impl FNaturalParams {
    pub fn center(&self, k: u64) -> f64 {
        self.n as f64 + (4 * k + 2) as f64 * self.w
    }

    pub fn tent_support(&self, k: u64) -> (f64, f64) {
        let n = self.n as f64;
        (n + (4 * k + 1) as f64 * self.w, n + (4 * k + 3) as f64 * self.w)
    }

    pub fn hull(&self) -> (f64, f64) {
        let n = self.n as f64;
        (n, n + self.hull_length())
    }

    /// `4·N·w`.
    pub fn hull_length(&self) -> f64 {
        4.0 * self.count as f64 * self.w
    }
}

/// `log N_n ≥ n⁴ − log(32n⁴)`, the ceiling only adding to it.
pub(crate) fn log_count_lower(n: u32) -> f64 {
    let n4 = (n as f64).powi(4);
    n4 - (32.0 * n4).ln()
}

pub fn fnatural_params(n: u32) -> Result<FNaturalParams> {
    if n < 2 {
        return Err(invalid("n", "must be at least 2"));
    }
    let n4 = (n as f64).powi(4);
    let log_n = log_count_lower(n);
    if log_n > 63.0 * std::f64::consts::LN_2 {
        return Err(Error::OverflowAtScale { n, log_n });
    }
    let count = (n4.exp() / (32.0 * n4)).ceil() as u64;
    Ok(FNaturalParams {
        n,
        w: (-n4).exp(),
        log_w: -n4,
        count,
    })
}
