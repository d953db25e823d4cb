use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-block ramp windows. Block `l` holds alpha at 0 before its window, ramps linearly
/// inside `[start, end)`, and stays at 1 afterwards. Windows are ordered left block first
/// and do not overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    total_iterations: usize,
    windows: Vec<(usize, usize)>,
}

impl AlphaSchedule {
    pub fn new(total_iterations: usize, windows: Vec<(usize, usize)>) -> Result<Self> {
        let mut prev_end = 0;
        for (l, &(start, end)) in windows.iter().enumerate() {
            if start >= end {
                return Err(Error::InvalidParameter(format!(
                    "window {l} is empty: [{start}, {end})"
                )));
            }
            if start < prev_end {
                return Err(Error::InvalidParameter(format!(
                    "window {l} overlaps or precedes window {}",
                    l.saturating_sub(1)
                )));
            }
            if end > total_iterations {
                return Err(Error::InvalidParameter(format!(
                    "window {l} ends at {end}, past the {total_iterations} iterations"
                )));
            }
            prev_end = end;
        }
        Ok(AlphaSchedule {
            total_iterations,
            windows,
        })
    }

    /// Splits `[start_frac * N, end_frac * N)` into `blocks` equal consecutive windows.
    /// With fewer ramp iterations than blocks, block `l` simply switches on at iteration `l + 1`.
    pub fn sequential(
        blocks: usize,
        total_iterations: usize,
        start_frac: f64,
        end_frac: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&start_frac) || !(start_frac..=1.0).contains(&end_frac) {
            return Err(Error::InvalidParameter(format!(
                "ramp fractions must satisfy 0 <= start <= end <= 1, got {start_frac}, {end_frac}"
            )));
        }
        if blocks == 0 {
            return Self::new(total_iterations, Vec::new());
        }
        let n = total_iterations as f64;
        let begin = (start_frac * n).round() as usize;
        let finish = ((end_frac * n).round() as usize).min(total_iterations);
        let span = finish.saturating_sub(begin);
        if span < blocks {
            // not enough iterations to ramp: switch blocks on one per iteration
            return Ok(AlphaSchedule {
                total_iterations,
                windows: (0..blocks).map(|l| (l, l + 1)).collect(),
            });
        }
        let windows = (0..blocks)
            .map(|l| {
                (
                    begin + l * span / blocks,
                    begin + (l + 1) * span / blocks,
                )
            })
            .collect();
        Self::new(total_iterations, windows)
    }

    pub fn total_iterations(&self) -> usize {
        self.total_iterations
    }

    pub fn windows(&self) -> &[(usize, usize)] {
        &self.windows
    }

    pub fn num_blocks(&self) -> usize {
        self.windows.len()
    }

    pub fn alpha_at(&self, iteration: usize) -> Vec<f64> {
        self.windows
            .iter()
            .map(|&(start, end)| {
                if iteration < start {
                    0.0
                } else if iteration >= end {
                    1.0
                } else {
                    (iteration - start) as f64 / (end - start) as f64
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints() {
        let s = AlphaSchedule::sequential(3, 200, 0.0, 0.6).unwrap();
        assert_eq!(s.alpha_at(0), vec![0.0; 3]);
        assert_eq!(s.alpha_at(200), vec![1.0; 3]);
        assert_eq!(s.alpha_at(10_000), vec![1.0; 3]);
    }

    #[test]
    fn two_block_midpoint() {
        let s = AlphaSchedule::new(200, vec![(0, 100), (100, 200)]).unwrap();
        assert_eq!(s.alpha_at(50), vec![0.5, 0.0]);
        assert_eq!(s.alpha_at(150), vec![1.0, 0.5]);
    }

    #[test]
    fn rejects_overlap_and_overrun() {
        assert!(AlphaSchedule::new(100, vec![(0, 60), (50, 100)]).is_err());
        assert!(AlphaSchedule::new(100, vec![(0, 120)]).is_err());
        assert!(AlphaSchedule::new(100, vec![(10, 10)]).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_left_to_right(blocks in 1usize..6, n in 6usize..400,
                                      a in 0.0f64..0.5, b in 0.5f64..1.0) {
            let s = AlphaSchedule::sequential(blocks, n, a, b).unwrap();
            let mut prev = s.alpha_at(0);
            prop_assert!(prev.iter().all(|&v| v == 0.0));
            for it in 1..=n + 2 {
                let cur = s.alpha_at(it);
                for l in 0..blocks {
                    prop_assert!(cur[l] >= prev[l]);
                    prop_assert!((0.0..=1.0).contains(&cur[l]));
                    if l > 0 && cur[l] > 0.0 {
                        // a block only moves once every block to its left is saturated
                        prop_assert_eq!(cur[l - 1], 1.0);
                    }
                }
                prev = cur;
            }
            prop_assert!(prev.iter().all(|&v| v == 1.0));
        }
    }
}
