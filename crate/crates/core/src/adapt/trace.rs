use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::losses::LossComponents;

/// Epoch-mean loss components and the validation cross-entropy after the epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total: f64,
    pub ce_source: f64,
    pub ce_augment: f64,
    pub ctr_source: f64,
    pub ctr_target: f64,
    pub mmd: f64,
    pub val_ce: f64,
}

impl EpochRecord {
    pub fn components(&self) -> LossComponents {
        LossComponents {
            ce_source: self.ce_source,
            ce_augment: self.ce_augment,
            ctr_source: self.ctr_source,
            ctr_target: self.ctr_target,
            mmd: self.mmd,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    /// Epoch at which early stopping fired, if it did.
    pub early_stop_epoch: Option<usize>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
}

impl TrainTrace {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for e in &self.epochs {
            wtr.serialize(e)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    /// Parses epoch rows written by [`TrainTrace::write_csv`].
    pub fn read_csv_epochs(r: impl Read) -> Result<Vec<EpochRecord>> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut out = Vec::new();
        for row in rdr.deserialize() {
            out.push(row?);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let trace = TrainTrace {
            epochs: vec![
                EpochRecord { epoch: 1, total: 1.0 / 3.0, ce_source: 0.1, ce_augment: 0.2, ctr_source: 7.25, ctr_target: 1e-17, mmd: 0.0, val_ce: 0.69 },
                EpochRecord { epoch: 2, total: 2.5, ce_source: 0.3, ce_augment: 0.4, ctr_source: 3.0, ctr_target: 4.0, mmd: 0.123456789012345, val_ce: 0.5 },
            ],
            early_stop_epoch: None,
            best_epoch: Some(2),
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epoch,total,ce_source,ce_augment,ctr_source,ctr_target,mmd,val_ce"));
        assert_eq!(TrainTrace::read_csv_epochs(&buf[..]).unwrap(), trace.epochs);
        let back: TrainTrace = serde_json::from_str(&trace.to_json().unwrap()).unwrap();
        assert_eq!(back, trace);
    }
}
