//! Per-neuron interpreters: a regression tree from state to response, a
//! classifier from response back to a decision path, and the logic program of
//! every path.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetView, Matrix, NeuronId, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::logic::{self, LogicProgram, Notation, ProgramTableRow, Reduction};
use crate::tree::{DecisionTree, PathId, TreeConfig, TreeKind};

/// Version written into serialized bundles.
pub const FORMAT_VERSION: u32 = 1;

/// Default number of response bins recorded alongside the tree settings.
pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpretConfig {
    pub surrogate: TreeConfig,
    pub classifier: TreeConfig,
    pub n_bins: usize,
}

impl Default for InterpretConfig {
    fn default() -> Self {
        InterpretConfig {
            surrogate: TreeConfig::surrogate(),
            classifier: TreeConfig::path_classifier(),
            n_bins: DEFAULT_BINS,
        }
    }
}

impl InterpretConfig {
    pub fn validate(&self) -> Result<()> {
        self.surrogate.validate()?;
        self.classifier.validate()?;
        if self.n_bins == 0 {
            return Err(Error::Config("n_bins must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronInterpreter {
    pub neuron: NeuronId,
    /// Response column in the dataset the interpreter was built from.
    pub column: usize,
    pub surrogate: DecisionTree,
    /// One-feature classification tree whose labels are surrogate path ids.
    pub classifier: DecisionTree,
    /// Indexed by `PathId`.
    pub programs: Vec<LogicProgram>,
}

impl NeuronInterpreter {
    /// Fits both trees for response column `column`.
    pub fn fit(
        view: &DatasetView,
        neuron: NeuronId,
        column: usize,
        cfg: &InterpretConfig,
    ) -> Result<Self> {
        if column >= view.responses.ncols() {
            return Err(Error::UnknownNeuron(neuron.to_string()));
        }
        let z = view.responses.column(column);
        let surrogate = DecisionTree::fit_regression(&view.states, &z, &cfg.surrogate)?;
        let labels: Vec<usize> = surrogate
            .paths_of_rows(&view.states)?
            .into_iter()
            .map(|p| p.0)
            .collect();
        let classifier =
            DecisionTree::fit_classification(&Matrix::column_vector(&z), &labels, &cfg.classifier)?;
        let programs = surrogate
            .enumerate_paths()
            .into_iter()
            .map(|p| LogicProgram::new(p.predicates).with_source(column, p.id))
            .collect();
        log::debug!(
            "neuron {neuron}: {} surrogate paths, {} classifier leaves",
            surrogate.n_paths(),
            classifier.n_paths()
        );
        Ok(NeuronInterpreter {
            neuron,
            column,
            surrogate,
            classifier,
            programs,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.programs.len()
    }

    /// The path the classifier assigns to response `z`.
    pub fn predict_path(&self, z: f64) -> PathId {
        let label = self
            .classifier
            .predict_class(&[z])
            .expect("classifier is a one-feature classification tree");
        PathId(label)
    }

    pub fn interpret(&self, z: f64) -> &LogicProgram {
        &self.programs[self.predict_path(z).0]
    }

    pub fn program(&self, path: PathId) -> Result<&LogicProgram> {
        self.programs.get(path.0).ok_or(Error::UnknownPath {
            path: path.0,
            count: self.programs.len(),
        })
    }

    /// Surrogate path of every row of `states`.
    pub fn true_paths(&self, states: &Matrix) -> Result<Vec<PathId>> {
        self.surrogate.paths_of_rows(states)
    }

    /// Classifier path for every response in `z`.
    pub fn predicted_paths(&self, z: &[f64]) -> Vec<PathId> {
        z.iter().map(|&v| self.predict_path(v)).collect()
    }

    /// True when every program is empty, i.e. the surrogate never split.
    pub fn is_trivial(&self) -> bool {
        self.programs.iter().all(LogicProgram::is_empty)
    }

    fn check(&self, state_dim: usize) -> Result<()> {
        let schema = |msg: String| Err(Error::Schema(format!("neuron {}: {msg}", self.neuron)));
        if self.surrogate.kind() != TreeKind::Regression || self.surrogate.n_features() != state_dim
        {
            return schema(format!(
                "surrogate must be a regression tree over {state_dim} state dimensions"
            ));
        }
        if self.classifier.kind() != TreeKind::Classification || self.classifier.n_features() != 1 {
            return schema("classifier must be a one-feature classification tree".into());
        }
        let paths = self.surrogate.enumerate_paths();
        if paths.len() != self.programs.len()
            || paths
                .iter()
                .zip(&self.programs)
                .any(|(p, prog)| p.predicates != prog.predicates)
        {
            return schema("programs do not match the surrogate's paths".into());
        }
        if let Some(&bad) = self
            .classifier
            .classes()
            .iter()
            .find(|&&c| c >= paths.len())
        {
            return schema(format!("classifier label {bad} is not a surrogate path"));
        }
        Ok(())
    }
}

/// Everything needed to turn a timestep's responses back into programs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyInterpretation {
    pub format_version: u32,
    pub state_names: Vec<String>,
    pub config: InterpretConfig,
    pub interpreters: Vec<NeuronInterpreter>,
}

/// Programs chosen for every interpreted neuron at one timestep and their
/// intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestepInterpretation {
    pub programs: Vec<LogicProgram>,
    pub reduction: Reduction,
}

impl PolicyInterpretation {
    /// Builds interpreters for the response columns in `neurons`, in the order
    /// given. Neurons are fitted in parallel on the current rayon pool.
    pub fn build(ds: &TrajectoryDataset, neurons: &[usize], cfg: &InterpretConfig) -> Result<Self> {
        cfg.validate()?;
        let view = ds.flatten();
        Self::build_from_view(&view, ds.state_names(), ds.neuron_ids(), neurons, cfg)
    }

    /// `build` over every neuron of `ds`.
    pub fn build_all(ds: &TrajectoryDataset, cfg: &InterpretConfig) -> Result<Self> {
        let all: Vec<usize> = (0..ds.n_neurons()).collect();
        Self::build(ds, &all, cfg)
    }

    pub fn build_from_view(
        view: &DatasetView,
        state_names: &[String],
        neuron_ids: &[NeuronId],
        neurons: &[usize],
        cfg: &InterpretConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if let Some(&bad) = neurons.iter().find(|&&c| c >= neuron_ids.len()) {
            return Err(Error::UnknownNeuron(bad.to_string()));
        }
        let interpreters = neurons
            .par_iter()
            .map(|&c| NeuronInterpreter::fit(view, neuron_ids[c].clone(), c, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(PolicyInterpretation {
            format_version: FORMAT_VERSION,
            state_names: state_names.to_vec(),
            config: *cfg,
            interpreters,
        })
    }

    /// Looks a neuron up by label, falling back to its column index.
    pub fn interpreter(&self, neuron: &str) -> Result<&NeuronInterpreter> {
        self.interpreters
            .iter()
            .find(|n| n.neuron.to_string() == neuron)
            .or_else(|| {
                let column: usize = neuron.parse().ok()?;
                self.interpreters.iter().find(|n| n.column == column)
            })
            .ok_or_else(|| Error::UnknownNeuron(neuron.to_string()))
    }

    pub fn interpret_response(&self, neuron: &str, z: f64) -> Result<&LogicProgram> {
        Ok(self.interpreter(neuron)?.interpret(z))
    }

    /// Interprets a full response vector, indexed by dataset column.
    pub fn interpret_timestep(&self, z: &[f64]) -> Result<TimestepInterpretation> {
        let programs = self
            .interpreters
            .iter()
            .map(|n| {
                z.get(n.column)
                    .map(|&v| n.interpret(v).clone())
                    .ok_or(Error::Dimension {
                        expected: n.column + 1,
                        actual: z.len(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let reduction = logic::reduce(&programs);
        Ok(TimestepInterpretation {
            programs,
            reduction,
        })
    }

    /// One row per neuron with every path program rendered in `notation`.
    pub fn program_table_rows(&self, notation: Notation) -> Vec<ProgramTableRow> {
        self.interpreters
            .iter()
            .map(|n| ProgramTableRow {
                neuron: n.neuron.to_string(),
                programs: n
                    .programs
                    .iter()
                    .map(|p| logic::render(p, &self.state_names, notation))
                    .collect(),
            })
            .collect()
    }

    pub fn program_table(&self, notation: Notation) -> String {
        logic::render_program_table(&self.program_table_rows(notation))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("interpretation serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let pi: PolicyInterpretation = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        pi.check()?;
        Ok(pi)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }

    fn check(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.config.validate()?;
        for n in &self.interpreters {
            n.check(self.state_names.len())?;
        }
        Ok(())
    }
}
