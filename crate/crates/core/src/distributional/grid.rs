use crate::error::{argument, Result};
use crate::expected::ValueTable;
use crate::mdp::Mdp;

/// Reference gains: K strictly increasing bin centers. Bin edges sit at the
/// midpoints between consecutive centers; the outer bins are unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct GainGrid {
    centers: Vec<f64>,
    edges: Vec<f64>,
}

impl GainGrid {
    pub fn new(centers: Vec<f64>) -> Result<Self> {
        if centers.len() < 2 {
            return Err(argument(format!("a grid needs at least 2 bins, got {}", centers.len())));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(argument("grid centers must be finite"));
        }
        if centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(argument("grid centers must be strictly increasing"));
        }
        let edges = centers.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(GainGrid { centers, edges })
    }

    /// K centers spread evenly over `[lo, hi]`, both ends included.
    pub fn uniform(lo: f64, hi: f64, k_bins: usize) -> Result<Self> {
        if k_bins < 2 {
            return Err(argument(format!("need at least 2 bins, got {k_bins}")));
        }
        if !(lo < hi) {
            return Err(argument(format!("empty grid span [{lo}, {hi}]")));
        }
        let step = (hi - lo) / (k_bins - 1) as f64;
        let mut centers: Vec<f64> = (0..k_bins).map(|i| lo + step * i as f64).collect();
        centers[k_bins - 1] = hi;
        GainGrid::new(centers)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// The K − 1 finite edges; −∞ and +∞ close the outer bins.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Bin containing `gain`. A gain on an edge belongs to the upper bin;
    /// gains past the outer centers land in the outer bins.
    pub fn bin_of(&self, gain: f64) -> usize {
        self.edges.partition_point(|&e| e <= gain)
    }

    /// Largest spacing between consecutive centers.
    pub fn bin_width(&self) -> f64 {
        self.centers.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridMode {
    /// One grid for every state over [r_min/(1−λ), r_max/(1−λ)].
    GlobalSpan,
    /// Same span length, shifted per state so center ⌈K/2⌉ (1-based) sits
    /// on the given value.
    CenteredAt(ValueTable),
}

/// Gain span every policy's gain lies in. Degenerate spans (all rewards
/// equal) are widened by 0.5 on each side.
pub fn gain_span(mdp: &Mdp) -> (f64, f64) {
    let (r_min, r_max) = mdp.reward_range();
    let scale = 1.0 - mdp.discount();
    let (lo, hi) = (r_min / scale, r_max / scale);
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Builds one grid per state.
pub fn make_grid(mdp: &Mdp, k_bins: usize, mode: &GridMode) -> Result<Vec<GainGrid>> {
    if k_bins < 2 {
        return Err(argument(format!("need at least 2 bins, got {k_bins}")));
    }
    let (lo, hi) = gain_span(mdp);
    match mode {
        GridMode::GlobalSpan => {
            let grid = GainGrid::uniform(lo, hi, k_bins)?;
            Ok(vec![grid; mdp.n_states()])
        }
        GridMode::CenteredAt(values) => {
            if values.values.len() != mdp.n_states() {
                return Err(argument("value table does not cover every state"));
            }
            let step = (hi - lo) / (k_bins - 1) as f64;
            let middle = k_bins.div_ceil(2) - 1;
            values
                .values
                .iter()
                .map(|&v| {
                    let centers = (0..k_bins).map(|i| v + step * (i as f64 - middle as f64)).collect();
                    GainGrid::new(centers)
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::recycling_robot;

    #[test]
    fn global_span_recycling_robot() {
        let mdp = Mdp::new(recycling_robot()).unwrap();
        let grids = make_grid(&mdp, 5, &GridMode::GlobalSpan).unwrap();
        assert_eq!(grids.len(), 2);
        assert_eq!(grids[0], grids[1]);
        let c = grids[0].centers();
        assert!((c[0] + 5.0).abs() < 1e-12 && (c[4] - 4.5).abs() < 1e-12);
        for w in c.windows(2) {
            assert!((w[1] - w[0] - 2.375).abs() < 1e-12);
        }
    }

    #[test]
    fn centered_mode_places_middle_center() {
        let mdp = Mdp::new(recycling_robot()).unwrap();
        for k in [5, 6, 256] {
            let values = ValueTable { values: vec![3.18, 3.92] };
            let grids = make_grid(&mdp, k, &GridMode::CenteredAt(values)).unwrap();
            let m = k.div_ceil(2) - 1;
            assert!((grids[0].centers()[m] - 3.18).abs() < 1e-12);
            assert!((grids[1].centers()[m] - 3.92).abs() < 1e-12);
            let span = grids[0].centers()[k - 1] - grids[0].centers()[0];
            assert!((span - 9.5).abs() < 1e-9);
        }
    }

    #[test]
    fn two_bin_edges() {
        let g = GainGrid::uniform(1.0, 3.0, 2).unwrap();
        assert_eq!(g.edges(), &[2.0]);
        assert_eq!(g.bin_of(1.999), 0);
        assert_eq!(g.bin_of(2.0), 1);
        assert_eq!(g.bin_of(-100.0), 0);
        assert_eq!(g.bin_of(100.0), 1);
    }

    #[test]
    fn rejects_bad_grids() {
        let mdp = Mdp::new(recycling_robot()).unwrap();
        assert!(make_grid(&mdp, 1, &GridMode::GlobalSpan).is_err());
        assert!(GainGrid::new(vec![1.0]).is_err());
        assert!(GainGrid::new(vec![1.0, 1.0]).is_err());
        assert!(GainGrid::new(vec![2.0, 1.0]).is_err());
        assert!(GainGrid::new(vec![0.0, f64::NAN]).is_err());
    }
}
