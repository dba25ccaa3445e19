use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FieldSchema, GroundTruth, RecordTable};
use crate::error::{Error, Result};
use crate::model::{categorical_draw, dirichlet_draw};

/// Share of individuals observed in exactly `files` (1-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternWeight {
    pub files: Vec<usize>,
    pub proportion: f64,
}

/// Synthetic survey panel drawn from the model. Defaults mimic a three-wave
/// panel with sex, birth year, state and regional office, about a thousand
/// records per wave.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub field_names: Vec<String>,
    pub levels: Vec<u32>,
    pub files: usize,
    pub individuals: usize,
    pub patterns: Vec<PatternWeight>,
    /// Per-cell probability of replacing the true value with a draw from `theta`.
    pub distortion: f64,
    /// Dirichlet concentration per level used to draw `theta`.
    pub theta_concentration: f64,
    /// Chance that a record is written twice to its file.
    pub duplicate_rate: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        // individuals per wave pattern in a real three-wave panel
        let counts = [
            (vec![1], 8396.0),
            (vec![2], 2959.0),
            (vec![1, 2], 4464.0),
            (vec![3], 7572.0),
            (vec![1, 3], 1511.0),
            (vec![2, 3], 3929.0),
            (vec![1, 2, 3], 6114.0),
        ];
        let total: f64 = counts.iter().map(|c| c.1).sum();
        Self {
            field_names: ["sex", "birth_year", "state", "office"].map(String::from).to_vec(),
            levels: vec![2, 100, 50, 30],
            files: 3,
            individuals: 1837,
            patterns: counts
                .into_iter()
                .map(|(files, c)| PatternWeight { files, proportion: c / total })
                .collect(),
            distortion: 0.0,
            theta_concentration: 10.0,
            duplicate_rate: 0.0,
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        FieldSchema::new(self.field_names.clone(), self.levels.clone())?;
        if self.files == 0 || self.individuals == 0 {
            return Err(Error::Config("need at least one file and one individual".into()));
        }
        if !(0.0..1.0).contains(&self.distortion) {
            return Err(Error::Config(format!("distortion {} outside [0, 1)", self.distortion)));
        }
        if !(0.0..1.0).contains(&self.duplicate_rate) {
            return Err(Error::Config(format!("duplicate rate {} outside [0, 1)", self.duplicate_rate)));
        }
        if !(self.theta_concentration > 0.0 && self.theta_concentration.is_finite()) {
            return Err(Error::Config("theta concentration must be positive".into()));
        }
        if self.patterns.is_empty() {
            return Err(Error::Config("no overlap patterns given".into()));
        }
        for p in &self.patterns {
            let mut f = p.files.clone();
            f.sort_unstable();
            f.dedup();
            if f.is_empty() || f.len() != p.files.len() || f[0] == 0 || *f.last().unwrap() > self.files {
                return Err(Error::Config(format!("pattern {:?} must list distinct files in 1..={}", p.files, self.files)));
            }
            if !(p.proportion >= 0.0) {
                return Err(Error::Config(format!("pattern {:?} has a negative proportion", p.files)));
            }
        }
        let total: f64 = self.patterns.iter().map(|p| p.proportion).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("pattern proportions sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Individuals per pattern by largest remainder.
    fn pattern_counts(&self) -> Vec<usize> {
        let exact: Vec<f64> = self.patterns.iter().map(|p| p.proportion * self.individuals as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let short = self.individuals - counts.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            counts[i] += 1;
        }
        counts
    }
}

#[derive(Clone, Debug)]
pub struct SimulatedData {
    pub table: RecordTable,
    pub truth: GroundTruth,
    pub theta: Vec<Vec<f64>>,
    /// Values of each individual, indexed by true id.
    pub individuals: Vec<Vec<u32>>,
    /// Which cells were redrawn, record-major in table order.
    pub distorted: Vec<bool>,
}

/// Draw a synthetic data set. Every random quantity is drawn whatever the
/// distortion level, so runs sharing a seed differ only in which cells get
/// replaced.
pub fn simulate_dataset<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<SimulatedData> {
    spec.validate()?;
    let schema = FieldSchema::new(spec.field_names.clone(), spec.levels.clone())?;
    let theta: Vec<Vec<f64>> = spec
        .levels
        .iter()
        .map(|&m| dirichlet_draw(&vec![spec.theta_concentration; m as usize], rng))
        .collect();

    let mut individuals = Vec::with_capacity(spec.individuals);
    let mut patterns = Vec::with_capacity(spec.individuals);
    for (i, count) in spec.pattern_counts().into_iter().enumerate() {
        for _ in 0..count {
            individuals.push(theta.iter().map(|t| categorical_draw(t, rng) as u32).collect::<Vec<u32>>());
            patterns.push(i);
        }
    }

    // (true id, values, distortion flags) per file
    let mut files: Vec<Vec<(u32, Vec<u32>, Vec<bool>)>> = vec![Vec::new(); spec.files];
    for (id, y) in individuals.iter().enumerate() {
        for &f in &spec.patterns[patterns[id]].files {
            let copies = if rng.random::<f64>() < spec.duplicate_rate { 2 } else { 1 };
            for _ in 0..copies {
                let mut values = Vec::with_capacity(y.len());
                let mut flags = Vec::with_capacity(y.len());
                for (l, &v) in y.iter().enumerate() {
                    let u: f64 = rng.random();
                    let replacement = categorical_draw(&theta[l], rng) as u32;
                    let hit = u < spec.distortion;
                    values.push(if hit { replacement } else { v });
                    flags.push(hit);
                }
                files[f - 1].push((id as u32, values, flags));
            }
        }
    }
    for file in &mut files {
        file.shuffle(rng);
    }
    let ids = files.iter().flatten().map(|r| Some(r.0)).collect();
    let distorted = files.iter().flatten().flat_map(|r| r.2.iter().copied()).collect();
    let table = RecordTable::new(schema, files.into_iter().map(|f| f.into_iter().map(|r| r.1).collect()).collect())?;
    Ok(SimulatedData {
        table,
        truth: GroundTruth::new(ids),
        theta,
        individuals,
        distorted,
    })
}
