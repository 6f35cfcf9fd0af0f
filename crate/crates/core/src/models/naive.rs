use super::{floored, require, ModelFit, ModelForecast, ModelKind, PredictiveDensity};
use crate::error::Result;
use crate::stats;

/// Last value carried forward; scale from the sample sd of first differences.
pub fn fit_predict_naive(history: &[f64], h: usize, sd_floor: f64) -> Result<ModelForecast> {
    require(history, 2)?;
    let mut flags = Vec::new();
    let sigma = floored(stats::sd(&stats::diff(history)), sd_floor, &mut flags);
    let last = history[history.len() - 1];
    let densities = (1..=h)
        .map(|k| PredictiveDensity {
            mean: last,
            sd: floored(sigma * (k as f64).sqrt(), sd_floor, &mut flags),
        })
        .collect();
    Ok(ModelForecast {
        fit: ModelFit {
            kind: ModelKind::Naive,
            parameters: vec![sigma],
            fitted_on: history.len(),
        },
        densities,
        flags,
    })
}

/// Random walk with drift equal to the mean first difference.
pub fn fit_predict_rwdrift(history: &[f64], h: usize, sd_floor: f64) -> Result<ModelForecast> {
    require(history, 3)?;
    let n = history.len() as f64;
    let diffs = stats::diff(history);
    let drift = stats::mean(&diffs);
    let centered: Vec<f64> = diffs.iter().map(|d| d - drift).collect();
    let mut flags = Vec::new();
    let sigma = stats::sd(&centered);
    let last = history[history.len() - 1];
    let densities = (1..=h)
        .map(|k| {
            let k = k as f64;
            PredictiveDensity {
                mean: last + k * drift,
                sd: floored(sigma * (k * (1.0 + k / (n - 1.0))).sqrt(), sd_floor, &mut flags),
            }
        })
        .collect();
    Ok(ModelForecast {
        fit: ModelFit {
            kind: ModelKind::RwDrift,
            parameters: vec![drift, sigma],
            fitted_on: history.len(),
        },
        densities,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelFlag, DEFAULT_SD_FLOOR};

    #[test]
    fn naive_examples() {
        let f = fit_predict_naive(&[1.0, 2.0, 3.0], 2, DEFAULT_SD_FLOOR).unwrap();
        assert_eq!(f.densities.iter().map(|d| d.mean).collect::<Vec<_>>(), vec![3.0, 3.0]);

        let f = fit_predict_naive(&[1.0, 3.0, 2.0], 1, DEFAULT_SD_FLOOR).unwrap();
        assert!((f.densities[0].sd - 2.121_320_343_559_642_4).abs() < 1e-12);

        let f = fit_predict_naive(&[5.0, 5.0, 5.0], 1, DEFAULT_SD_FLOOR).unwrap();
        assert_eq!(f.densities[0].sd, DEFAULT_SD_FLOOR);
        assert!(f.flags.contains(&ModelFlag::SdFloored));

        assert!(fit_predict_naive(&[1.0], 1, DEFAULT_SD_FLOOR).is_err());
    }

    #[test]
    fn rwdrift_examples() {
        let f = fit_predict_rwdrift(&[1.0, 2.0, 3.0], 2, DEFAULT_SD_FLOOR).unwrap();
        assert_eq!(f.densities[1].mean, 5.0);
        assert_eq!(f.densities[0].sd, DEFAULT_SD_FLOOR);
        assert!(f.flags.contains(&ModelFlag::SdFloored));

        let f = fit_predict_rwdrift(&[0.0, 2.0, 1.0, 3.0], 1, DEFAULT_SD_FLOOR).unwrap();
        assert_eq!(f.densities[0].mean, 4.0);
        assert!((f.fit.parameters[1] - 3f64.sqrt()).abs() < 1e-12);

        assert!(fit_predict_rwdrift(&[1.0, 2.0], 1, DEFAULT_SD_FLOOR).is_err());
    }

    #[test]
    fn sd_nondecreasing_in_h() {
        let y = [0.3, -1.2, 0.8, 2.2, 1.9, 0.4, -0.5, 1.1];
        for f in [
            fit_predict_naive(&y, 12, DEFAULT_SD_FLOOR).unwrap(),
            fit_predict_rwdrift(&y, 12, DEFAULT_SD_FLOOR).unwrap(),
        ] {
            assert!(f.densities.windows(2).all(|w| w[1].sd >= w[0].sd));
        }
    }
}
