//! Rollout data model: episodes of world states and neuron responses.
//!
//! Two on-disk layouts are supported. The JSON layout is a single file:
//!
//! ```json
//! {"state_names": ["theta", "theta_dot"],
//!  "neuron_ids": [0, 1, "cmd3"],
//!  "episodes": [{"states": [[0.1, 0.0]], "responses": [[0.2, 0.4, 1.0]], "actions": null}]}
//! ```
//!
//! The CSV-directory layout holds a `header.json` with the names plus
//! `ep_<k>_states.csv` and `ep_<k>_responses.csv` (and optionally
//! `ep_<k>_actions.csv`) per episode, one timestep per row, no header row.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix with `cols` columns from row-major values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows; every row must have `cols` entries.
    pub fn from_rows(cols: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Single-column matrix.
    pub fn column_vector(values: &[f64]) -> Self {
        Matrix {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        (0..self.rows).map(move |r| self.row(r))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Label of an interpreted neuron. Files may use integers or strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NeuronId {
    Index(u64),
    Name(String),
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeuronId::Index(i) => write!(f, "{i}"),
            NeuronId::Name(s) => f.write_str(s),
        }
    }
}

impl From<u64> for NeuronId {
    fn from(i: u64) -> Self {
        NeuronId::Index(i)
    }
}

impl From<&str> for NeuronId {
    fn from(s: &str) -> Self {
        NeuronId::Name(s.to_owned())
    }
}

/// One rollout: `T` timesteps of states, responses and optional actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub states: Matrix,
    pub responses: Matrix,
    pub actions: Option<Matrix>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Validated collection of rollouts. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    state_names: Vec<String>,
    neuron_ids: Vec<NeuronId>,
    episodes: Vec<Episode>,
}

/// Episodes concatenated in episode-then-time order.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetView {
    pub states: Matrix,
    pub responses: Matrix,
}

impl DatasetView {
    pub fn n_rows(&self) -> usize {
        self.states.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Json,
    CsvDir,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(DataFormat::Json),
            "csv-dir" | "csv_dir" | "csv" => Ok(DataFormat::CsvDir),
            other => Err(Error::Config(format!(
                "unknown data format `{other}` (expected json or csv-dir)"
            ))),
        }
    }
}

impl TrajectoryDataset {
    /// Validates and assembles a dataset.
    pub fn new(
        state_names: Vec<String>,
        neuron_ids: Vec<NeuronId>,
        episodes: Vec<Episode>,
    ) -> Result<Self> {
        let d_s = state_names.len();
        let d_z = neuron_ids.len();
        if d_s == 0 {
            return Err(Error::Schema("state_names must not be empty".into()));
        }
        let mut total = 0;
        for (e, ep) in episodes.iter().enumerate() {
            let t = ep.states.nrows();
            if ep.states.ncols() != d_s {
                return Err(Error::Schema(format!(
                    "episode {e}: states have {} columns, header names {d_s}",
                    ep.states.ncols()
                )));
            }
            if ep.responses.ncols() != d_z {
                return Err(Error::Schema(format!(
                    "episode {e}: responses have {} columns, header names {d_z}",
                    ep.responses.ncols()
                )));
            }
            if ep.responses.nrows() != t {
                return Err(Error::Schema(format!(
                    "episode {e}: states have {t} timesteps but responses have {}",
                    ep.responses.nrows()
                )));
            }
            if let Some(actions) = &ep.actions {
                if actions.nrows() != t {
                    return Err(Error::Schema(format!(
                        "episode {e}: states have {t} timesteps but actions have {}",
                        actions.nrows()
                    )));
                }
            }
            check_finite(e, "state", &ep.states, &state_names)?;
            let neuron_labels: Vec<String> = neuron_ids.iter().map(|n| n.to_string()).collect();
            check_finite(e, "response", &ep.responses, &neuron_labels)?;
            if let Some(actions) = &ep.actions {
                let labels: Vec<String> = (0..actions.ncols()).map(|c| c.to_string()).collect();
                check_finite(e, "action", actions, &labels)?;
            }
            total += t;
        }
        if total == 0 {
            return Err(Error::Empty("dataset contains no timesteps".into()));
        }
        Ok(TrajectoryDataset {
            state_names,
            neuron_ids,
            episodes,
        })
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn neuron_ids(&self) -> &[NeuronId] {
        &self.neuron_ids
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn state_dim(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_neurons(&self) -> usize {
        self.neuron_ids.len()
    }

    pub fn n_rows(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    /// Resolves a user-supplied neuron token to a response column. The token is
    /// matched against the neuron labels first, then read as a column index.
    pub fn resolve_neuron(&self, token: &str) -> Result<usize> {
        if let Some(pos) = self.neuron_ids.iter().position(|n| n.to_string() == token) {
            return Ok(pos);
        }
        match token.parse::<usize>() {
            Ok(i) if i < self.neuron_ids.len() => Ok(i),
            _ => Err(Error::UnknownNeuron(token.to_owned())),
        }
    }

    /// Concatenates all episodes. Row order is episode order, then time order.
    pub fn flatten(&self) -> DatasetView {
        let n = self.n_rows();
        let mut states = Vec::with_capacity(n * self.state_dim());
        let mut responses = Vec::with_capacity(n * self.n_neurons());
        for ep in &self.episodes {
            states.extend_from_slice(ep.states.as_slice());
            responses.extend_from_slice(ep.responses.as_slice());
        }
        DatasetView {
            states: Matrix {
                rows: n,
                cols: self.state_dim(),
                data: states,
            },
            responses: Matrix {
                rows: n,
                cols: self.n_neurons(),
                data: responses,
            },
        }
    }

    /// Returns a copy of this dataset with its responses replaced.
    pub fn with_responses(
        &self,
        neuron_ids: Vec<NeuronId>,
        responses: Vec<Matrix>,
    ) -> Result<Self> {
        if responses.len() != self.episodes.len() {
            return Err(Error::Dimension {
                expected: self.episodes.len(),
                actual: responses.len(),
            });
        }
        let episodes = self
            .episodes
            .iter()
            .zip(responses)
            .map(|(ep, responses)| Episode {
                states: ep.states.clone(),
                responses,
                actions: ep.actions.clone(),
            })
            .collect();
        TrajectoryDataset::new(self.state_names.clone(), neuron_ids, episodes)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        parse_json(text, "<string>")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("dataset serialization is infallible")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json_string();
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Writes the CSV-directory layout, creating `dir` if needed.
    pub fn save_csv_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = CsvHeader {
            state_names: self.state_names.clone(),
            neuron_ids: self.neuron_ids.clone(),
            episode_count: self.episodes.len(),
            has_actions: self.episodes.iter().any(|e| e.actions.is_some()),
        };
        let header_path = dir.join("header.json");
        let text =
            serde_json::to_string_pretty(&header).expect("header serialization is infallible");
        fs::write(&header_path, text).map_err(|e| Error::io(&header_path, e))?;
        for (k, ep) in self.episodes.iter().enumerate() {
            write_csv(&dir.join(format!("ep_{k}_states.csv")), &ep.states)?;
            write_csv(&dir.join(format!("ep_{k}_responses.csv")), &ep.responses)?;
            if let Some(actions) = &ep.actions {
                write_csv(&dir.join(format!("ep_{k}_actions.csv")), actions)?;
            }
        }
        Ok(())
    }

    fn to_raw(&self) -> RawDataset {
        RawDataset {
            state_names: self.state_names.clone(),
            neuron_ids: self.neuron_ids.clone(),
            episodes: self
                .episodes
                .iter()
                .map(|ep| RawEpisode {
                    states: ep.states.to_rows(),
                    responses: ep.responses.to_rows(),
                    actions: ep.actions.as_ref().map(Matrix::to_rows),
                })
                .collect(),
        }
    }
}

/// Loads and validates a dataset in the given layout.
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<TrajectoryDataset> {
    match format {
        DataFormat::Json => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_json(&text, &path.display().to_string())
        }
        DataFormat::CsvDir => load_csv_dir(path),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    state_names: Vec<String>,
    neuron_ids: Vec<NeuronId>,
    episodes: Vec<RawEpisode>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEpisode {
    states: Vec<Vec<f64>>,
    responses: Vec<Vec<f64>>,
    #[serde(default)]
    actions: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct CsvHeader {
    state_names: Vec<String>,
    neuron_ids: Vec<NeuronId>,
    episode_count: usize,
    #[serde(default)]
    has_actions: bool,
}

fn parse_json(text: &str, origin: &str) -> Result<TrajectoryDataset> {
    let raw: RawDataset = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("{origin}, line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let d_s = raw.state_names.len();
    let d_z = raw.neuron_ids.len();
    let mut episodes = Vec::with_capacity(raw.episodes.len());
    for (e, ep) in raw.episodes.into_iter().enumerate() {
        let states = nested_to_matrix(e, "states", d_s, &ep.states)?;
        let responses = nested_to_matrix(e, "responses", d_z, &ep.responses)?;
        let actions = match &ep.actions {
            Some(rows) => {
                let width = rows.first().map_or(0, Vec::len);
                Some(nested_to_matrix(e, "actions", width, rows)?)
            }
            None => None,
        };
        episodes.push(Episode {
            states,
            responses,
            actions,
        });
    }
    TrajectoryDataset::new(raw.state_names, raw.neuron_ids, episodes)
}

fn nested_to_matrix(episode: usize, field: &str, cols: usize, rows: &[Vec<f64>]) -> Result<Matrix> {
    if let Some((t, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::Schema(format!(
            "episode {episode}: {field}[{t}] has {} values, expected {cols}",
            row.len()
        )));
    }
    Matrix::from_rows(cols, rows)
}

fn check_finite(episode: usize, kind: &str, m: &Matrix, labels: &[String]) -> Result<()> {
    for (t, row) in m.rows().enumerate() {
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                episode,
                timestep: t,
                field: format!("{kind} `{}` = {}", labels[c], row[c]),
            });
        }
    }
    Ok(())
}

fn load_csv_dir(dir: &Path) -> Result<TrajectoryDataset> {
    let header_path = dir.join("header.json");
    let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
    let header: CsvHeader = serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!(
            "{}, line {} column {}",
            header_path.display(),
            e.line(),
            e.column()
        ),
        message: e.to_string(),
    })?;
    let d_s = header.state_names.len();
    let d_z = header.neuron_ids.len();
    let mut episodes = Vec::with_capacity(header.episode_count);
    for k in 0..header.episode_count {
        let states = read_csv(&dir.join(format!("ep_{k}_states.csv")), Some(d_s), None)?;
        let t = states.nrows();
        let responses = read_csv(
            &dir.join(format!("ep_{k}_responses.csv")),
            Some(d_z),
            Some(t),
        )?;
        let actions_path = dir.join(format!("ep_{k}_actions.csv"));
        let actions = if header.has_actions && actions_path.exists() {
            Some(read_csv(&actions_path, None, None)?)
        } else {
            None
        };
        episodes.push(Episode {
            states,
            responses,
            actions,
        });
    }
    TrajectoryDataset::new(header.state_names, header.neuron_ids, episodes)
}

fn write_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    if m.ncols() > 0 {
        for row in m.rows() {
            // f64 Display is the shortest representation that round-trips
            writer
                .write_record(row.iter().map(|v| v.to_string()))
                .map_err(|e| csv_error(path, e))?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Reads a headerless numeric CSV. A zero-width file has no records, so its
/// row count is taken from `rows_if_empty`.
fn read_csv(path: &Path, cols: Option<usize>, rows_if_empty: Option<usize>) -> Result<Matrix> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    if cols == Some(0) {
        return Ok(Matrix::zeros(rows_if_empty.unwrap_or(0), 0));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut width = cols;
    let mut data = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Schema(format!(
                "{} line {line}: {} fields, expected {expected}",
                path.display(),
                record.len()
            )));
        }
        for (field, text) in record.iter().enumerate() {
            let value = text.parse::<f64>().map_err(|e| Error::Parse {
                location: format!("{} line {line} field {}", path.display(), field + 1),
                message: format!("`{text}`: {e}"),
            })?;
            data.push(value);
        }
        rows += 1;
    }
    Matrix::from_vec(rows, width.unwrap_or(0), data)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let location = match e.position() {
        Some(p) => format!("{} line {}", path.display(), p.line()),
        None => path.display().to_string(),
    };
    Error::Parse {
        location,
        message: e.to_string(),
    }
}
