use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Significance level for marking a condition as better.
pub const ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
}

impl WelchTest {
    pub fn significant(&self) -> bool {
        self.p_value < ALPHA
    }
}

/// Two-sided unequal-variance t-test of `a` against `b`; `None` when either
/// side has fewer than two values.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let moments = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
        (n, m, v / n)
    };
    let (na, ma, sa) = moments(a);
    let (nb, mb, sb) = moments(b);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Some(if ma == mb {
            WelchTest { t: 0.0, df, p_value: 1.0 }
        } else {
            WelchTest {
                t: (ma - mb).signum() * f64::INFINITY,
                df,
                p_value: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p_value = (2.0 * (1.0 - dist.cdf(t.abs()))).min(1.0);
    Some(WelchTest { t, df, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values from scipy.stats.ttest_ind(equal_var=False)
    #[test]
    fn matches_reference() {
        let r = welch_t_test(&[1.0, 2.0, 3.0], &[4.0, 6.0, 8.0, 10.0]).unwrap();
        assert!((r.t - -3.5355339059327378).abs() < 1e-12);
        assert!((r.df - 4.0754716981132075).abs() < 1e-12);
        assert!((r.p_value - 0.023376767600303685).abs() < 1e-9);
        assert!(r.significant());

        let r = welch_t_test(&[0.61, 0.64, 0.66, 0.63, 0.65], &[0.58, 0.60, 0.57, 0.62]).unwrap();
        assert!((r.t - 3.242426639426236).abs() < 1e-9);
        assert!((r.df - 6.0538876840283455).abs() < 1e-9);
        assert!((r.p_value - 0.0174111379468953).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_none());
        let same = welch_t_test(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(same.p_value, 1.0);
        let apart = welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(apart.p_value, 0.0);
        assert!(apart.t < 0.0);
    }

    #[test]
    fn symmetric_in_p() {
        let a = [0.3, 0.5, 0.4, 0.45];
        let b = [0.6, 0.52, 0.7];
        let ab = welch_t_test(&a, &b).unwrap();
        let ba = welch_t_test(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert!((ab.p_value - ba.p_value).abs() < 1e-15);
    }
}
