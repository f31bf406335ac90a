//! Coincidence histograms of time differences t_b − t_a and peak finding.

use crate::error::Result;
use crate::timetag::check_sorted;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub start_ps: i64,
    pub bin_ps: i64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bin_start(&self, i: usize) -> i64 {
        self.start_ps + i as i64 * self.bin_ps
    }

    /// Counts in the bins whose start lies within ±half of `center`.
    pub fn window_sum(&self, center_ps: i64, half_ps: i64) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(i, _)| (self.bin_start(*i) + self.bin_ps / 2 - center_ps).abs() <= half_ps)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &Histogram) {
        debug_assert_eq!((self.start_ps, self.bin_ps, self.counts.len()), (other.start_ps, other.bin_ps, other.counts.len()));
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("dt_ps,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{c}\n", self.bin_start(i)));
        }
        s
    }
}

/// Counts every pair with lo ≤ t_b − t_a < hi in bins of `bin_ps`,
/// sweeping both sorted streams once.
pub fn coincidence_histogram(a: &[u64], b: &[u64], lo_ps: i64, hi_ps: i64, bin_ps: i64) -> Result<Histogram> {
    check_sorted(a)?;
    check_sorted(b)?;
    let bins = ((hi_ps - lo_ps).max(0) + bin_ps - 1) / bin_ps;
    let mut counts = vec![0u64; bins as usize];
    let mut start = 0usize;
    for &ta in a {
        let ta = ta as i64;
        while start < b.len() && (b[start] as i64) - ta < lo_ps {
            start += 1;
        }
        let mut k = start;
        while k < b.len() {
            let d = b[k] as i64 - ta;
            if d >= hi_ps {
                break;
            }
            counts[((d - lo_ps) / bin_ps) as usize] += 1;
            k += 1;
        }
    }
    Ok(Histogram {
        start_ps: lo_ps,
        bin_ps,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub position_ps: i64,
    pub height: u64,
}

/// Clusters of bins standing `sigmas` Poisson deviations above the median
/// level; clusters closer than `merge_ps` are joined.
pub fn find_peaks(h: &Histogram, sigmas: f64, merge_ps: i64) -> Vec<Peak> {
    if h.counts.is_empty() {
        return Vec::new();
    }
    let mut sorted = h.counts.clone();
    sorted.sort_unstable();
    let median = sorted[sorted.len() / 2] as f64;
    let threshold = median + sigmas * (median + 1.0).sqrt();
    let mut peaks: Vec<Peak> = Vec::new();
    let mut last_hot: Option<i64> = None;
    for (i, &c) in h.counts.iter().enumerate() {
        if (c as f64) <= threshold {
            continue;
        }
        let x = h.bin_start(i) + h.bin_ps / 2;
        match (last_hot, peaks.last_mut()) {
            (Some(prev), Some(p)) if x - prev <= merge_ps => {
                if c > p.height {
                    *p = Peak { position_ps: x, height: c };
                }
            }
            _ => peaks.push(Peak { position_ps: x, height: c }),
        }
        last_hot = Some(x);
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::NetError;

    #[test]
    fn empty_streams() {
        let h = coincidence_histogram(&[], &[], -200, 200, 50).unwrap();
        assert_eq!(h.counts, vec![0; 8]);
    }

    #[test]
    fn single_pair_lands_in_its_bin() {
        let h = coincidence_histogram(&[1000], &[1100], -200, 200, 50).unwrap();
        let i = h.counts.iter().position(|c| *c == 1).unwrap();
        assert_eq!(h.bin_start(i), 100);
        assert_eq!(h.total(), 1);
    }

    #[test]
    fn sweep_matches_quadratic_count() {
        let a: Vec<u64> = (0..400).map(|k| k * 997 % 50_000).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let b: Vec<u64> = (0..400).map(|k| k * 577 % 50_000).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let h = coincidence_histogram(&a, &b, -3000, 3000, 100).unwrap();
        let brute = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| *y as i64 - *x as i64))
            .filter(|d| (-3000..3000).contains(d))
            .count() as u64;
        assert_eq!(h.total(), brute);
    }

    #[test]
    fn unsorted_is_rejected() {
        assert_eq!(coincidence_histogram(&[3, 1], &[], 0, 10, 1), Err(NetError::Ordering(1)));
    }

    #[test]
    fn peaks_found_above_flat_floor() {
        let mut counts = vec![10u64; 200];
        counts[50] = 200;
        counts[51] = 150;
        counts[120] = 300;
        let h = Histogram {
            start_ps: 0,
            bin_ps: 50,
            counts,
        };
        let p = find_peaks(&h, 6.0, 200);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].position_ps, 50 * 50 + 25);
    }
}
