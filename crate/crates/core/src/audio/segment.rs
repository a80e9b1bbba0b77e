use crate::{Config, TimeInterval, TIME_EPS};

/// Cuts a speech region into `window_s` windows at `stride_s`.
///
/// A remainder after the last full window gets one extra window anchored at
/// the region's end; regions shorter than a window come back unchanged.
pub fn slide_segments(interval: &TimeInterval, cfg: &Config) -> Vec<TimeInterval> {
    let (onset, offset) = (interval.onset(), interval.offset());
    let win = cfg.window_s;
    if interval.duration() < win + TIME_EPS {
        return vec![*interval];
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = onset + k as f64 * cfg.stride_s;
        if t + win > offset + TIME_EPS {
            break;
        }
        out.push(TimeInterval::new(t, (t + win).min(offset)).expect("positive window"));
        k += 1;
    }
    let last_end = out.last().map_or(onset, |w| w.offset());
    if offset - last_end > TIME_EPS {
        let tail = TimeInterval::new(offset - win, offset).expect("positive window");
        if out.last().is_none_or(|w| (w.onset() - tail.onset()).abs() > TIME_EPS) {
            out.push(tail);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ends(v: &[TimeInterval]) -> Vec<(f64, f64)> {
        v.iter()
            .map(|w| ((w.onset() * 1e6).round() / 1e6, (w.offset() * 1e6).round() / 1e6))
            .collect()
    }

    #[test]
    fn exact_window() {
        let cfg = Config::default();
        let w = slide_segments(&TimeInterval::new(0.0, 2.0).unwrap(), &cfg);
        assert_eq!(ends(&w), vec![(0.0, 2.0)]);
    }

    #[test]
    fn tail_window() {
        let cfg = Config::default();
        let w = slide_segments(&TimeInterval::new(0.0, 3.2).unwrap(), &cfg);
        assert_eq!(
            ends(&w),
            vec![(0.0, 2.0), (0.5, 2.5), (1.0, 3.0), (1.2, 3.2)]
        );
    }

    #[test]
    fn short_interval() {
        let cfg = Config::default();
        let w = slide_segments(&TimeInterval::new(0.0, 1.0).unwrap(), &cfg);
        assert_eq!(ends(&w), vec![(0.0, 1.0)]);
    }

    proptest::proptest! {
        #[test]
        fn windows_cover_interval(onset in 0.0f64..100.0, dur in 0.01f64..20.0) {
            let cfg = Config::default();
            let iv = TimeInterval::new(onset, onset + dur).unwrap();
            let w = slide_segments(&iv, &cfg);
            proptest::prop_assert!(!w.is_empty());
            for win in &w {
                proptest::prop_assert!(iv.contains(win));
            }
            proptest::prop_assert!((w[0].onset() - onset).abs() < TIME_EPS);
            proptest::prop_assert!((w.last().unwrap().offset() - iv.offset()).abs() < TIME_EPS);
            for pair in w.windows(2) {
                // consecutive windows overlap or touch, so the union has no holes
                proptest::prop_assert!(pair[1].onset() <= pair[0].offset() + TIME_EPS);
            }
        }
    }
}
