use super::UniformOnUnion;
use crate::error::{invalid, Error, Result};
use crate::numeric::fmt17;

/// Largest depth accepted; beyond 2^40 the dyadic numerators leave `u128`.
pub const MAX_CANTOR_DEPTH: u32 = 40;
/// Largest depth whose `2^K` intervals are materialized in memory.
pub const MAX_MATERIALIZED_DEPTH: u32 = 20;

/// Depth-`K` stage of the Smith–Volterra–Cantor construction.
///
/// Endpoints are exact dyadic rationals `num / 2^(2K+1)`; stage `n` removes
/// the open middle interval of length `4⁻ⁿ` from each of the `2^(n−1)`
/// intervals left by stage `n − 1`.
#[derive(Debug, Clone)]
pub struct FatCantor {
    depth: u32,
    numerators: Vec<(u128, u128)>,
    density: UniformOnUnion,
}

impl FatCantor {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// `log₂` of the common denominator.
    pub fn denominator_bits(&self) -> u32 {
        2 * self.depth + 1
    }

    /// The `2^K` closed intervals as exact numerators.
    pub fn exact_intervals(&self) -> &[(u128, u128)] {
        &self.numerators
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let scale = (-(self.denominator_bits() as f64)).exp2();
        self.numerators
            .iter()
            .map(|&(a, b)| (a as f64 * scale, b as f64 * scale))
            .collect()
    }

    /// `λ(A_K)` from the exact interval lengths.
    pub fn measure(&self) -> f64 {
        let total: u128 = self.numerators.iter().map(|(a, b)| b - a).sum();
        total as f64 * (-(self.denominator_bits() as f64)).exp2()
    }

    /// Closed form `1/2 + 2^-(K+1)`.
    pub fn measure_closed_form(&self) -> f64 {
        0.5 + (-(self.depth as f64 + 1.0)).exp2()
    }

    /// Uniform density `1/λ(A_K)` on the intervals.
    pub fn density(&self) -> &UniformOnUnion {
        &self.density
    }

    /// `left,right` rows with 17 significant digits.
    pub fn intervals_csv(&self) -> String {
        let mut out = String::from("left,right\n");
        for (a, b) in self.intervals() {
            out.push_str(&fmt17(a));
            out.push(',');
            out.push_str(&fmt17(b));
            out.push('\n');
        }
        out
    }
}

pub fn make_fat_cantor(depth: u32) -> Result<FatCantor> {
    if !(1..=MAX_CANTOR_DEPTH).contains(&depth) {
        return Err(invalid("depth", format!("must lie in 1..={MAX_CANTOR_DEPTH}, got {depth}")));
    }
    if depth > MAX_MATERIALIZED_DEPTH {
        return Err(Error::Unsupported(format!(
            "depth {depth} would materialize 2^{depth} intervals; at most {MAX_MATERIALIZED_DEPTH} is supported"
        )));
    }
    let bits = 2 * depth + 1;
    let one: u128 = 1 << bits;
    let mut cur = vec![(0u128, one)];
    for n in 1..=depth {
        // Removed length 4^-n in units of 2^-bits.
        let gap = 1u128 << (bits - 2 * n);
        let mut next = Vec::with_capacity(cur.len() * 2);
        for (a, b) in cur {
            let keep = (b - a - gap) / 2;
            next.push((a, a + keep));
            next.push((b - keep, b));
        }
        cur = next;
    }
    let scale = (-(bits as f64)).exp2();
    let pieces = cur
        .iter()
        .map(|&(a, b)| (a as f64 * scale, (b - a) as f64 * scale))
        .collect();
    let density = UniformOnUnion::new(format!("fat-cantor[K={depth}]"), pieces)?;
    Ok(FatCantor {
        depth,
        numerators: cur,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_one() {
        let c = make_fat_cantor(1).unwrap();
        assert_eq!(c.intervals(), vec![(0.0, 0.375), (0.625, 1.0)]);
        assert_eq!(c.measure(), 0.75);
    }

    #[test]
    fn measure_closed_form_is_exact() {
        for k in [1, 3, 8, 20] {
            let c = make_fat_cantor(k).unwrap();
            assert_eq!(c.measure(), c.measure_closed_form(), "K={k}");
            assert_eq!(c.exact_intervals().len(), 1 << k);
        }
        assert_eq!(make_fat_cantor(3).unwrap().measure(), 0.5625);
    }

    #[test]
    fn deeper_stages_refine() {
        let a = make_fat_cantor(5).unwrap();
        let b = make_fat_cantor(6).unwrap();
        let (ia, ib) = (a.exact_intervals(), b.exact_intervals());
        for (j, &(l, r)) in ib.iter().enumerate() {
            // Rescale the coarser endpoints to the finer denominator (factor 4).
            let (pl, pr) = ia[j / 2];
            assert!(4 * pl <= l && r <= 4 * pr);
        }
    }

    #[test]
    fn rejects_bad_depth() {
        assert!(make_fat_cantor(0).is_err());
        assert!(make_fat_cantor(41).is_err());
        assert!(matches!(make_fat_cantor(30), Err(Error::Unsupported(_))));
    }
}
