//! Domain types shared by every solver: the symptom/disease catalog, the
//! binary knowledge matrix, encoded observations, vignettes and the additive
//! noise model, together with their on-disk formats.
//!
//! All vectors and matrices use the catalog's index order. Symptoms are rows
//! of the knowledge matrix, diseases are columns.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An estimate or ground truth over the disease coordinates.
pub type DiseaseVector = DVector<f64>;

const DEMO_CATALOG: &str = include_str!("../data/demo_catalog.json");
const DEMO_MATRIX: &str = include_str!("../data/demo_matrix.csv");

#[derive(Debug, Serialize, Deserialize)]
struct CatalogFile {
    symptoms: Vec<String>,
    diseases: Vec<String>,
}

/// Ordered symptom and disease names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    symptoms: Vec<String>,
    diseases: Vec<String>,
    symptom_index: HashMap<String, usize>,
    disease_index: HashMap<String, usize>,
}

fn index_names(kind: &'static str, names: &[String]) -> Result<HashMap<String, usize>> {
    if names.is_empty() {
        return Err(Error::EmptyList(kind));
    }
    let mut index = HashMap::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        if index.insert(name.clone(), i).is_some() {
            return Err(Error::DuplicateName {
                kind,
                name: name.clone(),
            });
        }
    }
    Ok(index)
}

impl Catalog {
    pub fn new(symptoms: Vec<String>, diseases: Vec<String>) -> Result<Self> {
        let symptom_index = index_names("symptom", &symptoms)?;
        let disease_index = index_names("disease", &diseases)?;
        Ok(Catalog {
            symptoms,
            diseases,
            symptom_index,
            disease_index,
        })
    }

    /// Catalog with generated names `S01..`, `D01..`.
    pub fn numbered(symptom_count: usize, disease_count: usize) -> Result<Self> {
        let width_s = symptom_count.to_string().len().max(2);
        let width_d = disease_count.to_string().len().max(2);
        Catalog::new(
            (1..=symptom_count)
                .map(|i| format!("S{i:0width_s$}"))
                .collect(),
            (1..=disease_count)
                .map(|i| format!("D{i:0width_d$}"))
                .collect(),
        )
    }

    /// The bundled dermatology catalog: 27 symptoms and the 28 disease names
    /// that were published with the case study.
    pub fn demo() -> Self {
        Catalog::from_json_str(DEMO_CATALOG).expect("bundled catalog is valid")
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(json).map_err(|e| Error::parse("catalog", e))?;
        Catalog::new(file.symptoms, file.diseases)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Catalog::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let file = CatalogFile {
            symptoms: self.symptoms.clone(),
            diseases: self.diseases.clone(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("catalog serializes");
        out.push('\n');
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    /// M, the number of symptoms.
    pub fn symptom_count(&self) -> usize {
        self.symptoms.len()
    }

    /// N, the number of diseases.
    pub fn disease_count(&self) -> usize {
        self.diseases.len()
    }

    pub fn symptoms(&self) -> &[String] {
        &self.symptoms
    }

    pub fn diseases(&self) -> &[String] {
        &self.diseases
    }

    pub fn symptom_id(&self, name: &str) -> Result<usize> {
        self.symptom_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownName {
                kind: "symptom",
                name: name.to_string(),
            })
    }

    pub fn disease_id(&self, name: &str) -> Result<usize> {
        self.disease_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownName {
                kind: "disease",
                name: name.to_string(),
            })
    }
}

/// The M x N binary symptom-disease association matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeMatrix {
    entries: DMatrix<f64>,
}

impl KnowledgeMatrix {
    /// Validates that every entry is 0 or 1 and that no column is all zero.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::DimensionMismatch("knowledge matrix is empty".into()));
        }
        for col in 0..entries.ncols() {
            for row in 0..entries.nrows() {
                let v = entries[(row, col)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::NonBinaryEntry {
                        row,
                        col,
                        value: v.to_string(),
                    });
                }
            }
        }
        if let Some(col) = (0..entries.ncols()).find(|&j| entries.column(j).iter().all(|&v| v == 0.0)) {
            return Err(Error::ZeroColumn(format!("#{col}")));
        }
        Ok(KnowledgeMatrix { entries })
    }

    /// The bundled demo matrix, aligned with [`Catalog::demo`].
    ///
    /// The elicited clinical matrix is not public; this one is a seeded
    /// Bernoulli(0.3) draw with no empty column.
    pub fn demo() -> Self {
        KnowledgeMatrix::from_csv_reader(DEMO_MATRIX.as_bytes(), &Catalog::demo())
            .expect("bundled matrix is valid")
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn symptom_count(&self) -> usize {
        self.entries.nrows()
    }

    pub fn disease_count(&self) -> usize {
        self.entries.ncols()
    }

    /// Checks that the matrix dimensions agree with the catalog.
    pub fn check_catalog(&self, catalog: &Catalog) -> Result<()> {
        if self.symptom_count() != catalog.symptom_count()
            || self.disease_count() != catalog.disease_count()
        {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, catalog has {} symptoms and {} diseases",
                self.symptom_count(),
                self.disease_count(),
                catalog.symptom_count(),
                catalog.disease_count()
            )));
        }
        Ok(())
    }

    /// Parses the headered CSV format: the first row holds disease names, the
    /// first column symptom names. Rows and columns may appear in any order;
    /// they are realigned to the catalog.
    pub fn from_csv_reader<R: Read>(reader: R, catalog: &Catalog) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse("knowledge matrix", e))?
            .clone();
        let m = catalog.symptom_count();
        let n = catalog.disease_count();
        if headers.len() != n + 1 {
            return Err(Error::DimensionMismatch(format!(
                "header has {} disease columns, catalog has {n}",
                headers.len().saturating_sub(1)
            )));
        }
        let mut col_of = Vec::with_capacity(n);
        let mut seen = BTreeSet::new();
        for name in headers.iter().skip(1) {
            let id = catalog.disease_id(name)?;
            if !seen.insert(id) {
                return Err(Error::DuplicateName {
                    kind: "disease",
                    name: name.to_string(),
                });
            }
            col_of.push(id);
        }

        let mut entries = DMatrix::zeros(m, n);
        let mut rows_seen = BTreeSet::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::parse("knowledge matrix", e))?;
            if record.len() != n + 1 {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} cells, expected {}",
                    line + 1,
                    record.len(),
                    n + 1
                )));
            }
            let row = catalog.symptom_id(&record[0])?;
            if !rows_seen.insert(row) {
                return Err(Error::DuplicateName {
                    kind: "symptom",
                    name: record[0].to_string(),
                });
            }
            for (k, cell) in record.iter().skip(1).enumerate() {
                let value = match cell {
                    "0" => 0.0,
                    "1" => 1.0,
                    other => {
                        return Err(Error::NonBinaryEntry {
                            row,
                            col: col_of[k],
                            value: other.to_string(),
                        })
                    }
                };
                entries[(row, col_of[k])] = value;
            }
        }
        if rows_seen.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} symptom rows, catalog has {m}",
                rows_seen.len()
            )));
        }
        if let Some(j) = (0..n).find(|&j| entries.column(j).iter().all(|&v| v == 0.0)) {
            return Err(Error::ZeroColumn(catalog.diseases()[j].clone()));
        }
        Ok(KnowledgeMatrix { entries })
    }

    pub fn load_csv(path: impl AsRef<Path>, catalog: &Catalog) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        KnowledgeMatrix::from_csv_reader(file, catalog)
    }

    pub fn to_csv_string(&self, catalog: &Catalog) -> Result<String> {
        self.check_catalog(catalog)?;
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(catalog.diseases().iter().cloned());
        wtr.write_record(&header)
            .map_err(|e| Error::parse("knowledge matrix", e))?;
        for (i, name) in catalog.symptoms().iter().enumerate() {
            let mut record = vec![name.clone()];
            record.extend(
                self.entries
                    .row(i)
                    .iter()
                    .map(|&v| if v == 1.0 { "1".to_string() } else { "0".to_string() }),
            );
            wtr.write_record(&record)
                .map_err(|e| Error::parse("knowledge matrix", e))?;
        }
        let bytes = wtr
            .into_inner()
            .map_err(|e| Error::parse("knowledge matrix", e))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, catalog: &Catalog) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string(catalog)?).map_err(|e| Error::io(path, e))
    }

    /// Mean of `||A d||^2` when `d` is the indicator of a uniformly drawn
    /// support of size `k`.
    pub fn expected_signal_energy(&self, k: usize) -> f64 {
        let n = self.disease_count() as f64;
        let k = k as f64;
        let pair = if n > 1.0 {
            k * (k - 1.0) / (n * (n - 1.0))
        } else {
            0.0
        };
        self.entries
            .row_iter()
            .map(|row| {
                let r = row.sum();
                k / n * r + pair * (r * r - r)
            })
            .sum()
    }
}

/// One symptom coordinate of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symptom {
    Present,
    Absent,
    Missing,
}

impl Symptom {
    /// The channel value: `+1`, `-1`, or `None` for a missing entry.
    pub fn value(self) -> Option<f64> {
        match self {
            Symptom::Present => Some(1.0),
            Symptom::Absent => Some(-1.0),
            Symptom::Missing => None,
        }
    }
}

/// How symptoms that are neither reported present nor absent are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbsenceMode {
    #[default]
    AssumeAbsent,
    TreatMissing,
}

impl std::str::FromStr for AbsenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "assume-absent" => Ok(AbsenceMode::AssumeAbsent),
            "treat-missing" => Ok(AbsenceMode::TreatMissing),
            other => Err(Error::InvalidParameter(format!("unknown absence mode `{other}`"))),
        }
    }
}

/// The observed symptom vector `s` in `{+1, -1, missing}^M`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymptomObservation {
    values: Vec<Symptom>,
}

impl SymptomObservation {
    pub fn new(values: Vec<Symptom>) -> Self {
        SymptomObservation { values }
    }

    /// Builds a fully observed vector from signs; positive maps to present.
    pub fn from_signs(signs: &[f64]) -> Self {
        SymptomObservation::new(
            signs
                .iter()
                .map(|&s| if s > 0.0 { Symptom::Present } else { Symptom::Absent })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Symptom] {
        &self.values
    }

    pub fn observed_count(&self) -> usize {
        self.values.iter().filter(|v| **v != Symptom::Missing).count()
    }

    /// True when at least one entry is observed.
    pub fn has_evidence(&self) -> bool {
        self.observed_count() > 0
    }

    /// Dense `+-1` vector with missing entries resolved to absent.
    pub fn to_signs(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|v| v.value().unwrap_or(-1.0)),
        )
    }
}

/// Encodes named present/absent symptom lists into an observation vector.
pub fn encode_observation<S: AsRef<str>>(
    present: &[S],
    absent: &[S],
    catalog: &Catalog,
    mode: AbsenceMode,
) -> Result<SymptomObservation> {
    let present_ids = present
        .iter()
        .map(|name| catalog.symptom_id(name.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let absent_ids = absent
        .iter()
        .map(|name| catalog.symptom_id(name.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    encode_observation_ids(&present_ids, &absent_ids, catalog.symptom_count(), mode)
        .map_err(|e| match e {
            Error::Contradiction(id) => {
                let id: usize = id.parse().expect("contradiction carries an index");
                Error::Contradiction(catalog.symptoms()[id].clone())
            }
            other => other,
        })
}

/// Index-based variant of [`encode_observation`].
pub fn encode_observation_ids(
    present: &[usize],
    absent: &[usize],
    symptom_count: usize,
    mode: AbsenceMode,
) -> Result<SymptomObservation> {
    let default = match mode {
        AbsenceMode::AssumeAbsent => Symptom::Absent,
        AbsenceMode::TreatMissing => Symptom::Missing,
    };
    let mut values = vec![default; symptom_count];
    let present: BTreeSet<usize> = present.iter().copied().collect();
    let absent: BTreeSet<usize> = absent.iter().copied().collect();
    for &id in present.iter().chain(absent.iter()) {
        if id >= symptom_count {
            return Err(Error::UnknownName {
                kind: "symptom",
                name: format!("#{id}"),
            });
        }
    }
    if let Some(id) = present.intersection(&absent).next() {
        return Err(Error::Contradiction(id.to_string()));
    }
    for id in present {
        values[id] = Symptom::Present;
    }
    for id in absent {
        values[id] = Symptom::Absent;
    }
    Ok(SymptomObservation::new(values))
}

/// Additive Gaussian noise `w ~ N(0, 1/noise_precision I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub noise_precision: f64,
    pub snr_db: Option<f64>,
}

impl NoiseModel {
    pub fn from_precision(noise_precision: f64) -> Result<Self> {
        if !(noise_precision > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise precision must be positive, got {noise_precision}"
            )));
        }
        Ok(NoiseModel {
            noise_precision,
            snr_db: None,
        })
    }

    pub fn variance(&self) -> f64 {
        1.0 / self.noise_precision
    }
}

/// Noise precision for a target SNR: `M 10^(snr/10) / E||Ad||^2`.
pub fn snr_to_noise_precision(
    snr_db: f64,
    signal_energy: f64,
    symptom_count: usize,
) -> Result<NoiseModel> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!("snr_db must be finite, got {snr_db}")));
    }
    if !(signal_energy > 0.0) {
        return Err(Error::NonPositiveSignalEnergy(signal_energy));
    }
    let noise_precision = symptom_count as f64 * 10f64.powf(snr_db / 10.0) / signal_energy;
    Ok(NoiseModel {
        noise_precision,
        snr_db: Some(snr_db),
    })
}

/// One evaluation case: an observation and its confirmed diagnosis.
#[derive(Debug, Clone, PartialEq)]
pub struct Vignette {
    pub observation: SymptomObservation,
    pub truth_index: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct VignetteRecord {
    present: Vec<String>,
    absent: Vec<String>,
    diagnosis: String,
}

impl Vignette {
    /// The one-hot ground-truth disease vector.
    pub fn truth_vector(&self, disease_count: usize) -> DiseaseVector {
        let mut d = DVector::zeros(disease_count);
        d[self.truth_index] = 1.0;
        d
    }
}

/// Parses vignettes from JSON Lines. Blank lines are skipped.
pub fn read_vignettes<R: Read>(
    reader: R,
    catalog: &Catalog,
    mode: AbsenceMode,
) -> Result<Vec<Vignette>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::parse("vignettes", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: VignetteRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse("vignettes", format!("line {}: {e}", lineno + 1)))?;
        let observation = encode_observation(&record.present, &record.absent, catalog, mode)?;
        let truth_index = catalog.disease_id(&record.diagnosis)?;
        out.push(Vignette {
            observation,
            truth_index,
        });
    }
    Ok(out)
}

pub fn load_vignettes(
    path: impl AsRef<Path>,
    catalog: &Catalog,
    mode: AbsenceMode,
) -> Result<Vec<Vignette>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_vignettes(file, catalog, mode)
}

/// Serializes vignettes as JSON Lines; missing entries are omitted from both
/// lists.
pub fn vignettes_to_jsonl(vignettes: &[Vignette], catalog: &Catalog) -> String {
    let mut out = String::new();
    for v in vignettes {
        let mut record = VignetteRecord {
            present: Vec::new(),
            absent: Vec::new(),
            diagnosis: catalog.diseases()[v.truth_index].clone(),
        };
        for (name, value) in catalog.symptoms().iter().zip(v.observation.values()) {
            match value {
                Symptom::Present => record.present.push(name.clone()),
                Symptom::Absent => record.absent.push(name.clone()),
                Symptom::Missing => {}
            }
        }
        out.push_str(&serde_json::to_string(&record).expect("vignette serializes"));
        out.push('\n');
    }
    out
}

pub fn save_vignettes(
    path: impl AsRef<Path>,
    vignettes: &[Vignette],
    catalog: &Catalog,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, vignettes_to_jsonl(vignettes, catalog)).map_err(|e| Error::io(path, e))
}
