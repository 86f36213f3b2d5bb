use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use crate::data::SyntheticSpec;
use crate::eval::RunConfig;
use crate::losses::SigmaPolicy;
use crate::model::ModelDims;

/// How layer widths are chosen from the input width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelWidth {
    /// Reference widths for 768-wide inputs, compact widths otherwise.
    Auto,
    Compact,
    Reference,
}

impl ModelWidth {
    pub fn dims(self, input: usize) -> ModelDims {
        match self {
            ModelWidth::Reference => ModelDims { input, ..ModelDims::REFERENCE },
            ModelWidth::Compact => ModelDims::compact(input),
            ModelWidth::Auto if input == ModelDims::REFERENCE.input => ModelDims::REFERENCE,
            ModelWidth::Auto => ModelDims::compact(input),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ModelWidth::Auto => "auto",
            ModelWidth::Compact => "compact",
            ModelWidth::Reference => "reference",
        }
    }
}

/// Fully resolved run settings: defaults, then the config file, then flags.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub data: Option<PathBuf>,
    pub source_domains: Vec<String>,
    pub target_domains: Vec<String>,
    pub test_fraction: f64,
    pub run: RunConfig,
    pub model_width: ModelWidth,
    /// Used by `generate`, and in place of `data` when no file is given.
    pub synthetic: SyntheticSpec,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            data: None,
            source_domains: Vec::new(),
            target_domains: Vec::new(),
            test_fraction: 0.2,
            run: RunConfig::default(),
            model_width: ModelWidth::Auto,
            synthetic: SyntheticSpec::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "augment_std",
    "batch_size",
    "data",
    "dim",
    "epochs",
    "lambda_ce",
    "lambda_ctr",
    "lambda_mmd",
    "learning_rate",
    "margin",
    "model_width",
    "n_domains",
    "noise_std",
    "patience",
    "samples_per_domain",
    "seed",
    "shift",
    "sigma",
    "source_domains",
    "symmetrize",
    "target_domains",
    "temperature",
    "test_fraction",
    "tta",
    "tta_batch",
    "tta_passes",
    "validation_fraction",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value.trim().parse().map_err(|e| format!("invalid value {value:?} for {key}: {e}"))
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl Settings {
    pub fn seed(&self) -> u64 {
        self.run.train.seed
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.run.train;
        let w = &mut t.loss_weights;
        match key {
            "augment_std" => t.augment_std = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "data" => self.data = (!value.trim().is_empty()).then(|| PathBuf::from(value.trim())),
            "dim" => self.synthetic.dim = parse(key, value)?,
            "epochs" => t.max_epochs = parse(key, value)?,
            "lambda_ce" => w.lambda_ce = parse(key, value)?,
            "lambda_ctr" => w.lambda_ctr = parse(key, value)?,
            "lambda_mmd" => w.lambda_mmd = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "margin" => self.synthetic.margin = parse(key, value)?,
            "model_width" => {
                self.model_width = match value.trim() {
                    "auto" => ModelWidth::Auto,
                    "compact" => ModelWidth::Compact,
                    "reference" => ModelWidth::Reference,
                    other => return Err(format!("model_width must be auto, compact or reference, got {other:?}")),
                }
            }
            "n_domains" => self.synthetic.n_domains = parse(key, value)?,
            "noise_std" => self.synthetic.noise_std = parse(key, value)?,
            "patience" => t.patience = parse(key, value)?,
            "samples_per_domain" => self.synthetic.samples_per_domain = parse(key, value)?,
            "seed" => {
                let seed = parse(key, value)?;
                t.seed = seed;
                self.synthetic.seed = seed;
            }
            "shift" => self.synthetic.shift = parse(key, value)?,
            "sigma" => {
                w.sigma = match value.trim() {
                    "median" => SigmaPolicy::MedianHeuristic,
                    v => SigmaPolicy::Fixed(parse(key, v)?),
                }
            }
            "source_domains" => self.source_domains = list(value),
            "symmetrize" => t.symmetrize_contrastive = parse(key, value)?,
            "target_domains" => self.target_domains = list(value),
            "temperature" => w.temperature = parse(key, value)?,
            "test_fraction" => self.test_fraction = parse(key, value)?,
            "tta" => self.run.tta = parse(key, value)?,
            "tta_batch" => t.tta_batch_size = parse(key, value)?,
            "tta_passes" => t.tta_passes = parse(key, value)?,
            "validation_fraction" => t.validation_fraction = parse(key, value)?,
            other => return Err(format!("unknown setting {other:?}")),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            self.set(k.trim(), v).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn to_map(&self) -> BTreeMap<&'static str, String> {
        let t = &self.run.train;
        let w = &t.loss_weights;
        let s = &self.synthetic;
        let mut m = BTreeMap::new();
        m.insert("augment_std", t.augment_std.to_string());
        m.insert("batch_size", t.batch_size.to_string());
        m.insert("data", self.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        m.insert("dim", s.dim.to_string());
        m.insert("epochs", t.max_epochs.to_string());
        m.insert("lambda_ce", w.lambda_ce.to_string());
        m.insert("lambda_ctr", w.lambda_ctr.to_string());
        m.insert("lambda_mmd", w.lambda_mmd.to_string());
        m.insert("learning_rate", t.learning_rate.to_string());
        m.insert("margin", s.margin.to_string());
        m.insert("model_width", self.model_width.as_str().to_string());
        m.insert("n_domains", s.n_domains.to_string());
        m.insert("noise_std", s.noise_std.to_string());
        m.insert("patience", t.patience.to_string());
        m.insert("samples_per_domain", s.samples_per_domain.to_string());
        m.insert("seed", t.seed.to_string());
        m.insert("shift", s.shift.to_string());
        m.insert(
            "sigma",
            match w.sigma {
                SigmaPolicy::MedianHeuristic => "median".to_string(),
                SigmaPolicy::Fixed(v) => v.to_string(),
            },
        );
        m.insert("source_domains", self.source_domains.join(","));
        m.insert("symmetrize", t.symmetrize_contrastive.to_string());
        m.insert("target_domains", self.target_domains.join(","));
        m.insert("temperature", w.temperature.to_string());
        m.insert("test_fraction", self.test_fraction.to_string());
        m.insert("tta", self.run.tta.to_string());
        m.insert("tta_batch", t.tta_batch_size.to_string());
        m.insert("tta_passes", t.tta_passes.to_string());
        m.insert("validation_fraction", t.validation_fraction.to_string());
        m
    }

    /// `key = value` lines in key order; [`Settings::apply_text`] reads them back.
    pub fn to_text(&self) -> String {
        self.to_map().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut s = Settings::default();
        s.apply_text("# comment\nseed = 9\nsource_domains = a, b\ntarget_domains=c\nlambda_mmd = 0.3\nsigma = 2.5\ntta = false\ndata = x.jsonl\n")
            .unwrap();
        assert_eq!(s.seed(), 9);
        assert_eq!(s.synthetic.seed, 9);
        assert_eq!(s.source_domains, ["a", "b"]);
        let mut back = Settings::default();
        back.apply_text(&s.to_text()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn every_key_is_listed_and_serialized() {
        let s = Settings::default();
        let map = s.to_map();
        assert_eq!(map.keys().copied().collect::<Vec<_>>(), KEYS);
        let mut t = Settings::default();
        for (k, v) in &map {
            t.set(k, v).unwrap();
        }
        assert_eq!(t, s);
    }

    #[test]
    fn bad_lines_are_reported() {
        let mut s = Settings::default();
        assert!(s.apply_text("seed 3").unwrap_err().contains("line 1"));
        assert!(s.apply_text("nope = 1").unwrap_err().contains("unknown"));
        assert!(s.apply_text("epochs = -1").is_err());
    }

    #[test]
    fn auto_width() {
        assert_eq!(ModelWidth::Auto.dims(768), ModelDims::REFERENCE);
        assert_eq!(ModelWidth::Auto.dims(32), ModelDims::compact(32));
    }
}
