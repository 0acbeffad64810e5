// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//! Risk register: parsing, validation, canonical CSV output and a synthetic
//! planted-class generator.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Fixed leading columns of the register CSV; tag columns follow.
pub const FIXED_COLUMNS: [&str; 4] = ["risk_id", "title", "firm_id", "independent_impact"];

/// Qualitative impact level. Ordered `Low < Medium < High`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Impact {
    Low,
    Medium,
    High,
}

impl Impact {
    /// Levels in classification order (highest first).
    pub const DESCENDING: [Impact; 3] = [Impact::High, Impact::Medium, Impact::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Impact::High => "High",
            Impact::Medium => "Medium",
            Impact::Low => "Low",
        }
    }
}

impl fmt::Display for Impact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Impact {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "High" => Ok(Impact::High),
            "Medium" => Ok(Impact::Medium),
            "Low" => Ok(Impact::Low),
            other => Err(format!("unknown impact label '{other}' (expected High|Medium|Low)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskRecord {
    pub risk_id: u64,
    pub title: String,
    pub firm_id: String,
    pub independent_impact: Impact,
    pub characteristics: Vec<bool>,
}

impl RiskRecord {
    pub fn positives(&self) -> usize {
        self.characteristics.iter().filter(|&&b| b).count()
    }
}

/// A validated, immutable register. Node index `i` in every downstream graph
/// is row `i` of `risks()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RiskRegister {
    tag_names: Vec<String>,
    risks: Vec<RiskRecord>,
    firms: BTreeSet<String>,
}

impl RiskRegister {
    pub fn new(tag_names: Vec<String>, risks: Vec<RiskRecord>) -> Result<Self> {
        let mut seen_tags = HashSet::new();
        for t in &tag_names {
            if !seen_tags.insert(t.as_str()) {
                return Err(Error::Register(format!("duplicate tag name '{t}'")));
            }
        }
        let mut ids = HashSet::new();
        for r in &risks {
            if !ids.insert(r.risk_id) {
                return Err(Error::DuplicateRiskId(r.risk_id));
            }
            if r.characteristics.len() != tag_names.len() {
                return Err(Error::Register(format!(
                    "risk {} has {} characteristics, register declares {} tags",
                    r.risk_id,
                    r.characteristics.len(),
                    tag_names.len()
                )));
            }
        }
        let firms = risks.iter().map(|r| r.firm_id.clone()).collect();
        Ok(RiskRegister {
            tag_names,
            risks,
            firms,
        })
    }

    pub fn tag_names(&self) -> &[String] {
        &self.tag_names
    }

    pub fn num_tags(&self) -> usize {
        self.tag_names.len()
    }

    pub fn risks(&self) -> &[RiskRecord] {
        &self.risks
    }

    pub fn len(&self) -> usize {
        self.risks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.risks.is_empty()
    }

    /// Firm labels in sorted order.
    pub fn firms(&self) -> &BTreeSet<String> {
        &self.firms
    }

    pub fn risk_ids(&self) -> Vec<u64> {
        self.risks.iter().map(|r| r.risk_id).collect()
    }

    pub fn index_of(&self, risk_id: u64) -> Option<usize> {
        self.risks.iter().position(|r| r.risk_id == risk_id)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactCounts {
    pub high: usize,
    pub medium: usize,
    pub low: usize,
}

impl ImpactCounts {
    pub fn get(&self, level: Impact) -> usize {
        match level {
            Impact::High => self.high,
            Impact::Medium => self.medium,
            Impact::Low => self.low,
        }
    }

    pub fn total(&self) -> usize {
        self.high + self.medium + self.low
    }

    pub fn from_impacts(impacts: impl IntoIterator<Item = Impact>) -> Self {
        let mut counts = ImpactCounts::default();
        for level in impacts {
            match level {
                Impact::High => counts.high += 1,
                Impact::Medium => counts.medium += 1,
                Impact::Low => counts.low += 1,
            }
        }
        counts
    }
}

pub fn impact_counts(register: &RiskRegister) -> ImpactCounts {
    ImpactCounts::from_impacts(register.risks().iter().map(|r| r.independent_impact))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegisterFormat {
    Csv,
}

pub fn load_register(path: impl AsRef<Path>, format: RegisterFormat) -> Result<RiskRegister> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        RegisterFormat::Csv => read_register_csv(file),
    }
}

pub fn read_register_csv<R: Read>(reader: R) -> Result<RiskRegister> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    if header.len() < FIXED_COLUMNS.len() {
        return Err(Error::Schema {
            row: 1,
            column: header.iter().last().unwrap_or("").to_string(),
            message: format!("header must start with {}", FIXED_COLUMNS.join(",")),
        });
    }
    for (i, expected) in FIXED_COLUMNS.iter().enumerate() {
        if &header[i] != *expected {
            return Err(Error::Schema {
                row: 1,
                column: header[i].to_string(),
                message: format!("expected column '{expected}' at position {}", i + 1),
            });
        }
    }
    let tag_names: Vec<String> = header.iter().skip(FIXED_COLUMNS.len()).map(String::from).collect();

    let mut risks = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(Error::Schema {
                row,
                column: header.get(record.len()).unwrap_or("<extra>").to_string(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let schema_err = |col: usize, message: String| Error::Schema {
            row,
            column: header[col].to_string(),
            message,
        };

        let risk_id: u64 = record[0]
            .parse()
            .ok()
            .filter(|&id| id > 0)
            .ok_or_else(|| schema_err(0, format!("'{}' is not a positive integer", &record[0])))?;
        let independent_impact: Impact = record[3].parse().map_err(|m| schema_err(3, m))?;
        let characteristics = (FIXED_COLUMNS.len()..header.len())
            .map(|col| match &record[col] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(schema_err(col, format!("tag cell '{other}' is not 0 or 1"))),
            })
            .collect::<Result<Vec<bool>>>()?;

        risks.push(RiskRecord {
            risk_id,
            title: record[1].to_string(),
            firm_id: record[2].to_string(),
            independent_impact,
            characteristics,
        });
    }
    RiskRegister::new(tag_names, risks)
}

/// Writes the canonical CSV form; `read_register_csv` reads it back unchanged.
pub fn write_register_csv<W: Write>(register: &RiskRegister, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
    header.extend(register.tag_names().iter().map(String::as_str));
    wtr.write_record(&header)?;
    for r in register.risks() {
        let mut row = vec![
            r.risk_id.to_string(),
            r.title.clone(),
            r.firm_id.clone(),
            r.independent_impact.to_string(),
        ];
        row.extend(r.characteristics.iter().map(|&b| if b { "1" } else { "0" }.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<register writer>", e))?;
    Ok(())
}

/// Parameters of the planted-class register generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_modules: usize,
    pub risks_per_module: usize,
    pub tags_per_module: usize,
    /// Total tag count; defaults to `num_modules * tags_per_module`.
    pub total_tags: Option<usize>,
    /// Probability that a bit is replaced by a fair coin flip.
    pub noise_rate: f64,
    pub firms: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_modules: 5,
            risks_per_module: 10,
            tags_per_module: 4,
            total_tags: None,
            noise_rate: 0.05,
            firms: 5,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    /// Unspecified keys keep their defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut spec = SyntheticSpec::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || Error::InvalidParameter(format!("line {}: bad value for {key}: '{value}'", lineno + 1));
            match key {
                "num_modules" => spec.num_modules = value.parse().map_err(|_| bad())?,
                "risks_per_module" => spec.risks_per_module = value.parse().map_err(|_| bad())?,
                "tags_per_module" => spec.tags_per_module = value.parse().map_err(|_| bad())?,
                "total_tags" => spec.total_tags = Some(value.parse().map_err(|_| bad())?),
                "noise_rate" => spec.noise_rate = value.parse().map_err(|_| bad())?,
                "firms" => spec.firms = value.parse().map_err(|_| bad())?,
                "seed" => spec.seed = value.parse().map_err(|_| bad())?,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(spec)
    }

    pub fn total_tags(&self) -> usize {
        self.total_tags.unwrap_or(self.num_modules * self.tags_per_module)
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("num_modules", self.num_modules),
            ("risks_per_module", self.risks_per_module),
            ("tags_per_module", self.tags_per_module),
            ("firms", self.firms),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::InvalidParameter(format!(
                "noise_rate {} outside [0, 1]",
                self.noise_rate
            )));
        }
        let needed = self.num_modules * self.tags_per_module;
        if needed > self.total_tags() {
            return Err(Error::InvalidParameter(format!(
                "{} modules x {} tags need {needed} tags, only {} available",
                self.num_modules,
                self.tags_per_module,
                self.total_tags()
            )));
        }
        Ok(())
    }
}

/// A synthetic register together with its planted class of every row.
#[derive(Clone, Debug)]
pub struct SyntheticRegister {
    pub register: RiskRegister,
    pub classes: Vec<usize>,
}

/// Firm label for index `i`: `A`..`Z`, then `F27`, `F28`, ...
fn firm_label(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("F{}", i + 1)
    }
}

pub fn synthesize_register(spec: &SyntheticSpec) -> Result<SyntheticRegister> {
    spec.validate()?;
    let total_tags = spec.total_tags();
    let mut rng = rng::stream(spec.seed, &[rng::domain::SYNTH]);

    let tag_names = (1..=total_tags).map(|t| format!("tag_{t}")).collect();
    let mut risks = Vec::with_capacity(spec.num_modules * spec.risks_per_module);
    let mut classes = Vec::with_capacity(risks.capacity());
    for class in 0..spec.num_modules {
        let block = class * spec.tags_per_module..(class + 1) * spec.tags_per_module;
        for _ in 0..spec.risks_per_module {
            let risk_id = risks.len() as u64 + 1;
            let firm_id = firm_label(rng.gen_range(0..spec.firms));
            let independent_impact = Impact::DESCENDING[rng.gen_range(0..3)];
            let characteristics = (0..total_tags)
                .map(|t| {
                    let planted = block.contains(&t);
                    if spec.noise_rate > 0.0 && rng.gen_bool(spec.noise_rate) {
                        rng.gen_bool(0.5)
                    } else {
                        planted
                    }
                })
                .collect();
            risks.push(RiskRecord {
                risk_id,
                title: format!("Synthetic risk {risk_id} (class {})", class + 1),
                firm_id,
                independent_impact,
                characteristics,
            });
            classes.push(class);
        }
    }
    Ok(SyntheticRegister {
        register: RiskRegister::new(tag_names, risks)?,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_with(rows: &[&str], tags: &[&str]) -> String {
        let mut s = FIXED_COLUMNS.join(",");
        for t in tags {
            s.push(',');
            s.push_str(t);
        }
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn parses_valid_rows_in_order() {
        let text = csv_with(
            &["2,Cyber attack,A,High,1,0,1", "1,\"Flood, coastal\",B,Low,0,0,1"],
            &["cyber", "data", "climate"],
        );
        let reg = read_register_csv(text.as_bytes()).unwrap();
        assert_eq!(reg.len(), 2);
        assert_eq!(reg.risks()[0].risk_id, 2);
        assert_eq!(reg.risks()[1].title, "Flood, coastal");
        assert_eq!(reg.risks()[0].characteristics, vec![true, false, true]);
        assert_eq!(reg.firms().len(), 2);
        assert_eq!(reg.tag_names(), &["cyber", "data", "climate"]);
    }

    #[test]
    fn empty_register_with_header() {
        let reg = read_register_csv(csv_with(&[], &["a", "b"]).as_bytes()).unwrap();
        assert!(reg.is_empty());
        assert!(reg.firms().is_empty());
        assert_eq!(impact_counts(&reg), ImpactCounts::default());
    }

    #[test]
    fn non_binary_tag_names_cell() {
        let text = csv_with(&["1,x,A,High,0,2"], &["a", "b"]);
        match read_register_csv(text.as_bytes()).unwrap_err() {
            Error::Schema { row, column, message } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
                assert!(message.contains("'2'"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn blank_tag_cell_is_an_error() {
        let text = csv_with(&["1,x,A,High,,1"], &["a", "b"]);
        assert!(matches!(
            read_register_csv(text.as_bytes()),
            Err(Error::Schema { ref column, .. }) if column == "a"
        ));
    }

    #[test]
    fn rejects_duplicates_and_bad_impacts() {
        let dup = csv_with(&["1,x,A,High,1", "1,y,A,Low,0"], &["a"]);
        assert!(matches!(read_register_csv(dup.as_bytes()), Err(Error::DuplicateRiskId(1))));

        let bad = csv_with(&["1,x,A,high,1"], &["a"]);
        assert!(matches!(
            read_register_csv(bad.as_bytes()),
            Err(Error::Schema { ref column, .. }) if column == "independent_impact"
        ));

        let short = csv_with(&["1,x,A,High"], &["a"]);
        assert!(matches!(read_register_csv(short.as_bytes()), Err(Error::Schema { row: 2, .. })));

        let zero_id = csv_with(&["0,x,A,High,1"], &["a"]);
        assert!(matches!(
            read_register_csv(zero_id.as_bytes()),
            Err(Error::Schema { ref column, .. }) if column == "risk_id"
        ));
    }

    #[test]
    fn rejects_wrong_header() {
        let text = "id,title,firm_id,independent_impact,a\n";
        assert!(matches!(read_register_csv(text.as_bytes()), Err(Error::Schema { row: 1, .. })));
    }

    #[test]
    fn impact_counts_small() {
        let text = csv_with(&["1,x,A,Low,1", "2,y,A,Low,0", "3,z,B,Low,1"], &["a"]);
        let reg = read_register_csv(text.as_bytes()).unwrap();
        assert_eq!(
            impact_counts(&reg),
            ImpactCounts {
                high: 0,
                medium: 0,
                low: 3
            }
        );
    }

    #[test]
    fn synth_zero_noise_blocks() {
        let spec = SyntheticSpec {
            noise_rate: 0.0,
            seed: 3,
            ..SyntheticSpec::default()
        };
        let s = synthesize_register(&spec).unwrap();
        assert_eq!(s.register.len(), 50);
        assert_eq!(s.register.num_tags(), 20);
        for (r, &class) in s.register.risks().iter().zip(&s.classes) {
            for (t, &bit) in r.characteristics.iter().enumerate() {
                assert_eq!(bit, t / 4 == class);
            }
        }
        assert_eq!(synthesize_register(&spec).unwrap().register, s.register);
    }

    #[test]
    fn synth_rejects_oversized_blocks() {
        let spec = SyntheticSpec {
            total_tags: Some(10),
            ..SyntheticSpec::default()
        };
        assert!(matches!(synthesize_register(&spec), Err(Error::InvalidParameter(_))));
        let spec = SyntheticSpec {
            noise_rate: 1.5,
            ..SyntheticSpec::default()
        };
        assert!(synthesize_register(&spec).is_err());
    }

    #[test]
    fn full_noise_gives_fair_bits() {
        let spec = SyntheticSpec {
            num_modules: 5,
            risks_per_module: 40,
            noise_rate: 1.0,
            seed: 11,
            ..SyntheticSpec::default()
        };
        let reg = synthesize_register(&spec).unwrap().register;
        let ones: usize = reg.risks().iter().map(RiskRecord::positives).sum();
        let bits = (reg.len() * reg.num_tags()) as f64;
        let density = ones as f64 / bits;
        // 4000 fair bits: sd = 0.0079
        assert!((density - 0.5).abs() < 0.03, "density {density}");
    }

    #[test]
    fn kv_spec_parsing() {
        let spec = SyntheticSpec::from_kv_str("# demo\nnum_modules = 2\nnoise_rate=0.1\nseed=9\n").unwrap();
        assert_eq!(spec.num_modules, 2);
        assert_eq!(spec.noise_rate, 0.1);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.risks_per_module, 10);
        assert!(SyntheticSpec::from_kv_str("bogus=1").is_err());
        assert!(SyntheticSpec::from_kv_str("seed").is_err());
    }
}
