use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand_distr::{Distribution, Normal, StandardNormal};

use super::{files, stage_rng, RatingMode, SynthConfig, SynthError};
use crate::features::{FeatureMatrix, Provenance};
use crate::ingest::StateCode;
use crate::stats::ols;

/// One external panel column: raw values are `mean + sd * z`, z standard
/// normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelColumn {
    pub name: &'static str,
    pub provenance: Provenance,
    pub mean: f64,
    pub sd: f64,
}

const fn col(name: &'static str, provenance: Provenance, mean: f64, sd: f64) -> PanelColumn {
    PanelColumn {
        name,
        provenance,
        mean,
        sd,
    }
}

pub const PANEL_COLUMNS: [PanelColumn; 15] = [
    col("perc_under_18", Provenance::Demographic, 22.5, 2.0),
    col("perc_65_over", Provenance::Demographic, 16.0, 2.0),
    col("perc_african_american", Provenance::Demographic, 11.0, 6.0),
    col("perc_hispanic", Provenance::Demographic, 12.0, 6.0),
    col("perc_rural", Provenance::Demographic, 26.0, 12.0),
    col("median_household_income", Provenance::Economic, 60_000.0, 10_000.0),
    col("perc_unemployment", Provenance::Economic, 4.3, 1.0),
    col("income_inequality_ratio", Provenance::Economic, 4.5, 0.5),
    col("violent_crime_rate", Provenance::Economic, 380.0, 120.0),
    col("mentally_unhealthy_days", Provenance::Health, 4.0, 0.4),
    col("perc_adult_smoking", Provenance::Health, 17.0, 3.0),
    col("perc_adult_obesity", Provenance::Health, 30.0, 3.5),
    col("gun_sales", Provenance::Politics, 400_000.0, 150_000.0),
    col("firearm_fatalities_rate", Provenance::Politics, 12.0, 4.0),
    col("perc_vote_republican", Provenance::Politics, 48.0, 10.0),
];

/// 51-state external panel with its law rating.
#[derive(Debug, Clone)]
pub struct StatePanel {
    /// Raw columns keyed by state code, in [`PANEL_COLUMNS`] order.
    pub matrix: FeatureMatrix,
    /// Law rating per state, in row order.
    pub ratings: Vec<f64>,
    pub coefficients: BTreeMap<String, f64>,
    pub raw_coefficients: BTreeMap<String, f64>,
    pub planted_r2: Option<f64>,
}

impl StatePanel {
    /// Writes one CSV per provenance (`state` key column first) and the
    /// rating table.
    pub fn write_tables(&self, dir: &Path) -> Result<(), SynthError> {
        for (prov, file) in [
            (Provenance::Demographic, files::DEMOGRAPHIC),
            (Provenance::Economic, files::ECONOMIC),
            (Provenance::Health, files::HEALTH),
            (Provenance::Politics, files::POLITICS),
        ] {
            let part = self.matrix.select_provenance(&[prov]);
            part.write_csv(BufWriter::new(File::create(dir.join(file))?), "state")
                .map_err(|e| SynthError::Config(e.to_string()))?;
        }
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(files::RATINGS))?));
        w.write_record(["state", "rating"])?;
        for (k, r) in self.matrix.keys().iter().zip(&self.ratings) {
            w.write_record([k.clone(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws the panel and the rating
/// `intercept + sum(beta_j * z_j) + N(0, noise_sd)`, clipped to 1..=5 and
/// rounded in [`RatingMode::Rounded`]. Coefficients on raw columns are
/// `beta_j / sd_j`.
pub fn generate_state_panel(cfg: &SynthConfig, seed: u64) -> Result<StatePanel, SynthError> {
    cfg.validate()?;
    let keys: Vec<String> = StateCode::all().map(|s| s.to_string()).collect();
    let n = keys.len();
    let mut rng = stage_rng(seed, 20);
    let z: Vec<Vec<f64>> = PANEL_COLUMNS
        .iter()
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut matrix = FeatureMatrix::new(keys).map_err(|e| SynthError::Config(e.to_string()))?;
    for (c, zc) in PANEL_COLUMNS.iter().zip(&z) {
        let raw = zc.iter().map(|v| Some(c.mean + c.sd * v)).collect();
        matrix
            .push_column(c.name, c.provenance, raw)
            .map_err(|e| SynthError::Config(e.to_string()))?;
    }
    let beta = |name: &str| cfg.state_coefficients.get(name).copied().unwrap_or(0.0);
    let noise = Normal::new(0.0, cfg.rating_noise_sd.max(0.0)).map_err(|e| SynthError::Config(e.to_string()))?;
    let mut rng = stage_rng(seed, 21);
    let ratings: Vec<f64> = (0..n)
        .map(|i| {
            let lin = cfg.rating_intercept
                + PANEL_COLUMNS
                    .iter()
                    .zip(&z)
                    .map(|(c, zc)| beta(c.name) * zc[i])
                    .sum::<f64>()
                + noise.sample(&mut rng);
            match cfg.rating_mode {
                RatingMode::Rounded => lin.clamp(1.0, 5.0).round(),
                RatingMode::Continuous => lin,
            }
        })
        .collect();

    let active: Vec<&PanelColumn> = PANEL_COLUMNS
        .iter()
        .filter(|c| cfg.state_coefficients.contains_key(c.name))
        .collect();
    let planted_r2 = if active.is_empty() {
        None
    } else {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| active.iter().map(|c| matrix.get(i, c.name).unwrap_or(0.0)).collect())
            .collect();
        let names: Vec<String> = active.iter().map(|c| c.name.to_string()).collect();
        ols(&x, &ratings, &names).ok().map(|f| f.r2)
    };
    Ok(StatePanel {
        matrix,
        ratings,
        coefficients: cfg.state_coefficients.clone(),
        raw_coefficients: active.iter().map(|c| (c.name.to_string(), beta(c.name) / c.sd)).collect(),
        planted_r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_fit(p: &StatePanel, names: &[&str]) -> crate::stats::OlsFit {
        let x: Vec<Vec<f64>> = (0..p.matrix.n_rows())
            .map(|i| names.iter().map(|c| p.matrix.get(i, c).unwrap()).collect())
            .collect();
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        ols(&x, &p.ratings, &names).unwrap()
    }

    #[test]
    fn exact_linear_target_is_recovered() {
        let cfg = SynthConfig {
            state_coefficients: [("perc_rural".to_string(), 0.7)].into(),
            rating_noise_sd: 0.0,
            rating_mode: RatingMode::Continuous,
            ..SynthConfig::default()
        };
        let p = generate_state_panel(&cfg, 3).unwrap();
        assert_eq!(p.matrix.n_rows(), 51);
        let fit = raw_fit(&p, &["perc_rural"]);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[0] - 0.7 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn planted_coefficients_within_three_standard_errors() {
        let cfg = SynthConfig {
            rating_mode: RatingMode::Continuous,
            ..SynthConfig::default()
        };
        for seed in [1, 2, 3] {
            let p = generate_state_panel(&cfg, seed).unwrap();
            let names: Vec<&str> = p.raw_coefficients.keys().map(String::as_str).collect();
            let fit = raw_fit(&p, &names);
            for (j, name) in names.iter().enumerate() {
                let truth = p.raw_coefficients[*name];
                assert!(
                    (fit.coefficients[j] - truth).abs() <= 3.0 * fit.std_errors[j + 1],
                    "{name}: {} vs {truth}",
                    fit.coefficients[j]
                );
            }
        }
    }

    #[test]
    fn rounded_ratings_stay_on_scale() {
        let p = generate_state_panel(&SynthConfig::default(), 5).unwrap();
        assert!(p.ratings.iter().all(|r| (1.0..=5.0).contains(r) && r.fract() == 0.0));
        let q = generate_state_panel(&SynthConfig::default(), 5).unwrap();
        assert_eq!(p.ratings, q.ratings);
        assert_eq!(p.matrix, q.matrix);
    }
}
