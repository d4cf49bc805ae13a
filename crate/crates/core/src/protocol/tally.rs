use serde::{Deserialize, Serialize};

use super::rates::AnalyticRates;
use super::KeyBasis;
use crate::error::{Error, Result};
use crate::receiver::DetectorModel;
use crate::source::{Basis, IntensityLabel, SourceConfig};

/// Counts for one (intensity class, sender basis) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyCell {
    pub sent: u64,
    pub detected: u64,
    /// Detections registered in the sender's basis.
    pub sifted: u64,
    /// Sifted detections with the wrong bit.
    pub errors: u64,
}

impl TallyCell {
    fn add(&mut self, other: &TallyCell) {
        self.sent += other.sent;
        self.detected += other.detected;
        self.sifted += other.sifted;
        self.errors += other.errors;
    }
}

/// Sufficient statistics of a simulated block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TallyRecord", try_from = "TallyRecord")]
pub struct TallyTable {
    cells: [[TallyCell; 2]; 3],
    mu: [f64; 3],
    repetition_rate_hz: f64,
}

impl TallyTable {
    pub fn new(source: &SourceConfig) -> Self {
        Self {
            cells: Default::default(),
            mu: IntensityLabel::ALL.map(|l| source.class(l).mu),
            repetition_rate_hz: source.repetition_rate_hz,
        }
    }

    pub fn cell(&self, label: IntensityLabel, basis: Basis) -> &TallyCell {
        &self.cells[label.index()][basis.index()]
    }

    pub fn cell_mut(&mut self, label: IntensityLabel, basis: Basis) -> &mut TallyCell {
        &mut self.cells[label.index()][basis.index()]
    }

    pub fn mu(&self, label: IntensityLabel) -> f64 {
        self.mu[label.index()]
    }

    pub fn repetition_rate_hz(&self) -> f64 {
        self.repetition_rate_hz
    }

    pub fn total_pulses(&self) -> u64 {
        self.cells.iter().flatten().map(|c| c.sent).sum()
    }

    pub fn elapsed_s(&self) -> f64 {
        self.total_pulses() as f64 / self.repetition_rate_hz
    }

    pub fn class_total(&self, label: IntensityLabel) -> TallyCell {
        let mut total = TallyCell::default();
        for cell in &self.cells[label.index()] {
            total.add(cell);
        }
        total
    }

    /// Adds `other` into `self`. Both tables must describe the same source.
    pub fn merge(&mut self, other: &TallyTable) -> Result<()> {
        if self.mu != other.mu || self.repetition_rate_hz != other.repetition_rate_hz {
            return Err(Error::TallyMismatch(
                "tables come from sources with different intensities or rates".into(),
            ));
        }
        for (mine, theirs) in self.cells.iter_mut().flatten().zip(other.cells.iter().flatten()) {
            mine.add(theirs);
        }
        Ok(())
    }

    pub fn rows(&self) -> Vec<TallyRow> {
        IntensityLabel::ALL
            .iter()
            .flat_map(|&class| Basis::ALL.iter().map(move |&basis| (class, basis)))
            .map(|(class, basis)| {
                let c = self.cell(class, basis);
                TallyRow {
                    class,
                    basis,
                    mu: self.mu(class),
                    sent: c.sent,
                    detected: c.detected,
                    sifted: c.sifted,
                    errors: c.errors,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TallyRow {
    pub class: IntensityLabel,
    pub basis: Basis,
    pub mu: f64,
    pub sent: u64,
    pub detected: u64,
    pub sifted: u64,
    pub errors: u64,
}

#[derive(Serialize, Deserialize)]
struct TallyRecord {
    repetition_rate_hz: f64,
    total_pulses: u64,
    rows: Vec<TallyRow>,
}

impl From<TallyTable> for TallyRecord {
    fn from(t: TallyTable) -> Self {
        TallyRecord {
            repetition_rate_hz: t.repetition_rate_hz,
            total_pulses: t.total_pulses(),
            rows: t.rows(),
        }
    }
}

impl TryFrom<TallyRecord> for TallyTable {
    type Error = String;

    fn try_from(r: TallyRecord) -> std::result::Result<Self, String> {
        let mut t = TallyTable {
            cells: Default::default(),
            mu: [0.0; 3],
            repetition_rate_hz: r.repetition_rate_hz,
        };
        for row in r.rows {
            if !(row.errors <= row.sifted && row.sifted <= row.detected && row.detected <= row.sent) {
                return Err(format!("inconsistent tally row for {:?}/{:?}", row.class, row.basis));
            }
            t.mu[row.class.index()] = row.mu;
            *t.cell_mut(row.class, row.basis) = TallyCell {
                sent: row.sent,
                detected: row.detected,
                sifted: row.sifted,
                errors: row.errors,
            };
        }
        if t.total_pulses() != r.total_pulses {
            return Err("row counts do not add up to total_pulses".into());
        }
        Ok(t)
    }
}

/// Sifted statistics of one intensity class. Counts are `f64` so expected
/// values from the analytic model and integer tallies share one type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub label: IntensityLabel,
    pub mu: f64,
    pub sent: f64,
    pub detected: f64,
    /// Sifted detections in the key basis.
    pub key_sifted: f64,
    pub key_errors: f64,
    /// Sifted detections in either basis, used for error estimation.
    pub sifted: f64,
    pub errors: f64,
}

impl ClassStats {
    fn empty(label: IntensityLabel, mu: f64) -> Self {
        Self {
            label,
            mu,
            sent: 0.0,
            detected: 0.0,
            key_sifted: 0.0,
            key_errors: 0.0,
            sifted: 0.0,
            errors: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiftedStats {
    /// Indexed by [`IntensityLabel::index`].
    pub classes: [ClassStats; 3],
    pub total_pulses: f64,
    pub elapsed_s: f64,
}

impl SiftedStats {
    pub fn class(&self, label: IntensityLabel) -> &ClassStats {
        &self.classes[label.index()]
    }

    /// Expected statistics of `n_pulses` pulses under the analytic model.
    pub fn expected(
        rates: &AnalyticRates,
        source: &SourceConfig,
        det: &DetectorModel,
        key_basis: KeyBasis,
        n_pulses: f64,
    ) -> Self {
        let (pa, pb) = (source.basis_probability_z, det.basis_probability_z);
        let q_both = pa * pb + (1.0 - pa) * (1.0 - pb);
        let q_key = match key_basis {
            KeyBasis::Rectilinear => pa * pb,
            KeyBasis::Both => q_both,
        };
        let classes = rates.classes.map(|c| {
            let sent = n_pulses * c.emit_probability;
            let detected = sent * c.gain;
            ClassStats {
                label: c.label,
                mu: c.mu,
                sent,
                detected,
                key_sifted: detected * q_key,
                key_errors: detected * q_key * c.error_rate,
                sifted: detected * q_both,
                errors: detected * q_both * c.error_rate,
            }
        });
        SiftedStats {
            classes,
            total_pulses: n_pulses,
            elapsed_s: n_pulses / source.repetition_rate_hz,
        }
    }

    /// Sums two blocks of the same source.
    pub fn combine(&self, other: &SiftedStats) -> SiftedStats {
        let mut out = self.clone();
        for (a, b) in out.classes.iter_mut().zip(&other.classes) {
            a.sent += b.sent;
            a.detected += b.detected;
            a.key_sifted += b.key_sifted;
            a.key_errors += b.key_errors;
            a.sifted += b.sifted;
            a.errors += b.errors;
        }
        out.total_pulses += other.total_pulses;
        out.elapsed_s += other.elapsed_s;
        out
    }

    pub fn empty_like(source: &SourceConfig) -> SiftedStats {
        SiftedStats {
            classes: IntensityLabel::ALL.map(|l| ClassStats::empty(l, source.class(l).mu)),
            total_pulses: 0.0,
            elapsed_s: 0.0,
        }
    }
}

/// Keeps same-basis detections only.
pub fn sift(t: &TallyTable, key_basis: KeyBasis) -> SiftedStats {
    let classes = IntensityLabel::ALL.map(|label| {
        let mut s = ClassStats::empty(label, t.mu(label));
        for basis in Basis::ALL {
            let c = t.cell(label, basis);
            s.sent += c.sent as f64;
            s.detected += c.detected as f64;
            s.sifted += c.sifted as f64;
            s.errors += c.errors as f64;
            if key_basis == KeyBasis::Both || basis == Basis::Rectilinear {
                s.key_sifted += c.sifted as f64;
                s.key_errors += c.errors as f64;
            }
        }
        s
    });
    SiftedStats {
        classes,
        total_pulses: t.total_pulses() as f64,
        elapsed_s: t.elapsed_s(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_with(cells: &[(IntensityLabel, Basis, TallyCell)]) -> TallyTable {
        let mut t = TallyTable::new(&SourceConfig::default_785());
        for (l, b, c) in cells {
            *t.cell_mut(*l, *b) = *c;
        }
        t
    }

    #[test]
    fn wrong_basis_only_sifts_nothing() {
        let cell = TallyCell {
            sent: 100,
            detected: 40,
            sifted: 0,
            errors: 0,
        };
        let t = table_with(&[(IntensityLabel::Signal, Basis::Rectilinear, cell)]);
        let s = sift(&t, KeyBasis::Both);
        assert_eq!(s.class(IntensityLabel::Signal).sifted, 0.0);
        assert_eq!(s.class(IntensityLabel::Signal).detected, 40.0);
    }

    #[test]
    fn key_basis_filter() {
        let z = TallyCell {
            sent: 100,
            detected: 40,
            sifted: 30,
            errors: 2,
        };
        let x = TallyCell {
            sent: 10,
            detected: 4,
            sifted: 3,
            errors: 1,
        };
        let t = table_with(&[
            (IntensityLabel::Decoy, Basis::Rectilinear, z),
            (IntensityLabel::Decoy, Basis::Diagonal, x),
        ]);
        let rect = sift(&t, KeyBasis::Rectilinear);
        let d = rect.class(IntensityLabel::Decoy);
        assert_eq!((d.key_sifted, d.key_errors, d.sifted, d.errors), (30.0, 2.0, 33.0, 3.0));
        let both = sift(&t, KeyBasis::Both);
        assert_eq!(both.class(IntensityLabel::Decoy).key_sifted, 33.0);
        assert_eq!(t.total_pulses(), 110);
        assert!((t.elapsed_s() - 110.0 / 100e6).abs() < 1e-18);
    }

    #[test]
    fn merge_rejects_foreign_source() {
        let mut a = TallyTable::new(&SourceConfig::default_785());
        let mut other = SourceConfig::default_785();
        other.repetition_rate_hz = 50e6;
        assert!(a.merge(&TallyTable::new(&other)).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let cell = TallyCell {
            sent: 100,
            detected: 40,
            sifted: 20,
            errors: 1,
        };
        let t = table_with(&[(IntensityLabel::Vacuum, Basis::Diagonal, cell)]);
        let json = serde_json::to_string(&t).unwrap();
        let back: TallyTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn serde_rejects_inconsistent_rows() {
        let cell = TallyCell {
            sent: 10,
            detected: 40,
            sifted: 20,
            errors: 1,
        };
        let t = table_with(&[(IntensityLabel::Vacuum, Basis::Diagonal, cell)]);
        let json = serde_json::to_string(&t).unwrap();
        assert!(serde_json::from_str::<TallyTable>(&json).is_err());
    }
}
