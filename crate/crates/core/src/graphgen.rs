//! Finite graphs built from graphons: weighted deterministic (DD), dense
//! random (RD), sparse random (RS), plus Paley graphs.
//!
//! All generators produce symmetric structures with an empty diagonal.
//! Random generators give row `i` its own ChaCha stream (`seed`, stream `i`)
//! and draw exactly one uniform per pair `j > i` in increasing `j`, so the
//! result depends only on `(graphon, n, alpha, seed)` and not on how rows are
//! scheduled across threads.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphon::{Graphon, GraphonKind};

/// Rows per rayon task when scanning adjacency.
const ROW_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "DD")]
    Deterministic,
    #[serde(rename = "RD")]
    DenseRandom,
    #[serde(rename = "RS")]
    SparseRandom,
    #[serde(rename = "Paley")]
    Paley,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Deterministic => "DD",
            Model::DenseRandom => "RD",
            Model::SparseRandom => "RS",
            Model::Paley => "Paley",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "DD" => Ok(Model::Deterministic),
            "RD" => Ok(Model::DenseRandom),
            "RS" => Ok(Model::SparseRandom),
            "Paley" => Ok(Model::Paley),
            other => Err(Error::Parse(format!("unknown graph model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub model: Model,
    pub graphon: Option<Graphon>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    /// Row-major `n x n` weights.
    DenseWeighted(Vec<f64>),
    /// Bit-packed 0/1 adjacency, `words` u64 per row.
    DenseBinary { words: usize, bits: Vec<u64> },
    /// CSR neighbor lists, each sorted ascending.
    SparseNeighbors {
        offsets: Vec<usize>,
        neighbors: Vec<u32>,
    },
    /// Every off-diagonal entry equals `weight`.
    Complete { weight: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    storage: Storage,
    alpha: f64,
    provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub density: f64,
}

impl Graph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n);
        match &self.storage {
            Storage::DenseWeighted(w) => w[i * self.n + j],
            Storage::DenseBinary { words, bits } => {
                ((bits[i * words + j / 64] >> (j % 64)) & 1) as f64
            }
            Storage::SparseNeighbors { offsets, neighbors } => {
                let row = &neighbors[offsets[i]..offsets[i + 1]];
                if row.binary_search(&(j as u32)).is_ok() {
                    1.0
                } else {
                    0.0
                }
            }
            Storage::Complete { weight } => {
                if i == j {
                    0.0
                } else {
                    *weight
                }
            }
        }
    }

    /// Weighted degree `sum_j a_ij`; the neighbor count for binary storage.
    pub fn degree(&self, i: usize) -> f64 {
        match &self.storage {
            Storage::DenseWeighted(w) => w[i * self.n..(i + 1) * self.n].iter().sum(),
            Storage::DenseBinary { words, bits } => bits[i * words..(i + 1) * words]
                .iter()
                .map(|w| w.count_ones() as f64)
                .sum(),
            Storage::SparseNeighbors { offsets, .. } => (offsets[i + 1] - offsets[i]) as f64,
            Storage::Complete { weight } => weight * (self.n - 1) as f64,
        }
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees: Vec<f64> = (0..self.n).map(|i| self.degree(i)).collect();
        let total: f64 = degrees.iter().sum();
        let pairs = (self.n * (self.n - 1)) as f64;
        DegreeStats {
            min: degrees.iter().copied().fold(f64::INFINITY, f64::min),
            max: degrees.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: total / self.n as f64,
            density: if pairs > 0.0 { total / pairs } else { 0.0 },
        }
    }

    /// Undirected edges `(i, j, weight)` with `i < j` and nonzero weight, in
    /// row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            match &self.storage {
                Storage::SparseNeighbors { offsets, neighbors } => {
                    for &j in &neighbors[offsets[i]..offsets[i + 1]] {
                        if j as usize > i {
                            out.push((i, j as usize, 1.0));
                        }
                    }
                }
                _ => {
                    for j in i + 1..self.n {
                        let w = self.weight(i, j);
                        if w != 0.0 {
                            out.push((i, j, w));
                        }
                    }
                }
            }
        }
        out
    }

    /// Row sums against two vectors at once:
    /// `s_i = sum_j a_ij x_j`, `c_i = sum_j a_ij y_j`.
    ///
    /// Each row is accumulated sequentially in increasing `j`, so the result
    /// does not depend on how rows are split across threads.
    pub fn row_sums(&self, x: &[f64], y: &[f64], s: &mut [f64], c: &mut [f64]) {
        let n = self.n;
        assert!(x.len() == n && y.len() == n && s.len() == n && c.len() == n);

        if let Storage::Complete { weight } = self.storage {
            let tx: f64 = x.iter().sum();
            let ty: f64 = y.iter().sum();
            for i in 0..n {
                s[i] = weight * (tx - x[i]);
                c[i] = weight * (ty - y[i]);
            }
            return;
        }

        let row = |i: usize| -> (f64, f64) {
            let (mut a, mut b) = (0.0, 0.0);
            match &self.storage {
                Storage::DenseWeighted(w) => {
                    for ((wij, xj), yj) in w[i * n..(i + 1) * n].iter().zip(x).zip(y) {
                        a += wij * xj;
                        b += wij * yj;
                    }
                }
                Storage::DenseBinary { words, bits } => {
                    for (k, &word) in bits[i * words..(i + 1) * words].iter().enumerate() {
                        let mut m = word;
                        while m != 0 {
                            let j = k * 64 + m.trailing_zeros() as usize;
                            a += x[j];
                            b += y[j];
                            m &= m - 1;
                        }
                    }
                }
                Storage::SparseNeighbors { offsets, neighbors } => {
                    for &j in &neighbors[offsets[i]..offsets[i + 1]] {
                        a += x[j as usize];
                        b += y[j as usize];
                    }
                }
                Storage::Complete { .. } => unreachable!(),
            }
            (a, b)
        };

        if n < 2 * ROW_CHUNK {
            for i in 0..n {
                (s[i], c[i]) = row(i);
            }
        } else {
            s.par_chunks_mut(ROW_CHUNK)
                .zip(c.par_chunks_mut(ROW_CHUNK))
                .enumerate()
                .for_each(|(chunk, (sc, cc))| {
                    let base = chunk * ROW_CHUNK;
                    for k in 0..sc.len() {
                        (sc[k], cc[k]) = row(base + k);
                    }
                });
        }
    }

    /// Write the edge-list text format: a header of `key value` lines
    /// (`n`, `alpha`, `model`, optionally `seed`), then one `i j weight`
    /// line per undirected edge with `i < j`.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n {}", self.n)?;
        writeln!(out, "alpha {}", self.alpha)?;
        writeln!(out, "model {}", self.provenance.model)?;
        if let Some(seed) = self.provenance.seed {
            writeln!(out, "seed {seed}")?;
        }
        for (i, j, w) in self.edges() {
            writeln!(out, "{i} {j} {w}")?;
        }
        Ok(())
    }

    /// Parse the format written by [`Graph::write_edge_list`]. Storage is
    /// chosen from the model tag; the graphon is not recorded in the file.
    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Graph> {
        let mut n = None;
        let mut alpha = 1.0;
        let mut model = None;
        let mut seed = None;
        let mut edges = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: {line:?}", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["n", v] => n = Some(v.parse::<usize>().map_err(|_| bad())?),
                ["alpha", v] => alpha = v.parse::<f64>().map_err(|_| bad())?,
                ["model", v] => model = Some(v.parse::<Model>()?),
                ["seed", v] => seed = Some(v.parse::<u64>().map_err(|_| bad())?),
                [i, j, w] => {
                    let i: usize = i.parse().map_err(|_| bad())?;
                    let j: usize = j.parse().map_err(|_| bad())?;
                    let w: f64 = w.parse().map_err(|_| bad())?;
                    edges.push((i, j, w));
                }
                _ => return Err(bad()),
            }
        }
        let n = n.ok_or_else(|| Error::Parse("missing n header".into()))?;
        let model = model.ok_or_else(|| Error::Parse("missing model header".into()))?;
        if let Some(&(i, j, _)) = edges.iter().find(|&&(i, j, _)| i >= n || j >= n || i == j) {
            return Err(Error::Parse(format!("edge ({i},{j}) invalid for n={n}")));
        }
        let provenance = Provenance {
            model,
            graphon: None,
            seed,
        };
        let storage = match model {
            Model::Deterministic => {
                let mut w = vec![0.0; n * n];
                for &(i, j, v) in &edges {
                    w[i * n + j] = v;
                    w[j * n + i] = v;
                }
                Storage::DenseWeighted(w)
            }
            _ => {
                if edges.iter().any(|e| e.2 != 1.0) {
                    return Err(Error::Parse(format!("{model} graphs must have unit weights")));
                }
                let mut upper = vec![Vec::new(); n];
                for &(i, j, _) in &edges {
                    let (a, b) = (i.min(j), i.max(j));
                    upper[a].push(b as u32);
                }
                for row in &mut upper {
                    row.sort_unstable();
                    row.dedup();
                }
                if model == Model::SparseRandom {
                    sparse_storage(n, &upper)
                } else {
                    binary_storage(n, &upper)
                }
            }
        };
        Ok(Graph {
            n,
            storage,
            alpha,
            provenance,
        })
    }
}

fn binary_storage(n: usize, upper: &[Vec<u32>]) -> Storage {
    let words = n.div_ceil(64);
    let mut bits = vec![0u64; n * words];
    for (i, row) in upper.iter().enumerate() {
        for &j in row {
            let j = j as usize;
            bits[i * words + j / 64] |= 1 << (j % 64);
            bits[j * words + i / 64] |= 1 << (i % 64);
        }
    }
    Storage::DenseBinary { words, bits }
}

fn sparse_storage(n: usize, upper: &[Vec<u32>]) -> Storage {
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n];
    // Lower neighbors arrive in increasing i, upper ones are already sorted,
    // and every lower neighbor is smaller than every upper one.
    for (i, row) in upper.iter().enumerate() {
        for &j in row {
            lists[j as usize].push(i as u32);
        }
    }
    for (list, row) in lists.iter_mut().zip(upper) {
        list.extend_from_slice(row);
    }
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    let mut neighbors = Vec::with_capacity(lists.iter().map(Vec::len).sum());
    for list in &lists {
        neighbors.extend_from_slice(list);
        offsets.push(neighbors.len());
    }
    Storage::SparseNeighbors { offsets, neighbors }
}

/// For each row `i`, the `j > i` whose uniform draw falls below `prob(i, j)`.
fn sample_upper<P>(n: usize, seed: u64, prob: P) -> Vec<Vec<u32>>
where
    P: Fn(usize, usize) -> f64 + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (i + 1..n)
                .filter(|&j| rng.random::<f64>() < prob(i, j))
                .map(|j| j as u32)
                .collect()
        })
        .collect()
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("graph needs n >= 2, got {n}")));
    }
    Ok(())
}

/// Weighted graph with `a_ij` equal to the cell average of `w` (DD).
/// Constant kernels are stored implicitly as a complete graph.
pub fn deterministic_graph(w: &Graphon, n: usize) -> Result<Graph> {
    check_size(n)?;
    let storage = match w.kind() {
        GraphonKind::Constant { p } => Storage::Complete { weight: *p },
        _ => {
            let upper: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| (i + 1..n).map(|j| w.cell_average(n, i, j)).collect())
                .collect();
            let mut weights = vec![0.0; n * n];
            for (i, row) in upper.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    let j = i + 1 + k;
                    weights[i * n + j] = v;
                    weights[j * n + i] = v;
                }
            }
            Storage::DenseWeighted(weights)
        }
    };
    Ok(Graph {
        n,
        storage,
        alpha: 1.0,
        provenance: Provenance {
            model: Model::Deterministic,
            graphon: Some(w.clone()),
            seed: None,
        },
    })
}

/// Dense W-random graph (RD): independent edges with probability equal to
/// the cell average.
pub fn dense_random(w: &Graphon, n: usize, seed: u64) -> Result<Graph> {
    check_size(n)?;
    if matches!(w.kind(), GraphonKind::PowerLaw { .. }) || !w.is_probability_kernel() {
        return Err(Error::InvalidModel(format!(
            "dense random graphs need a [0,1]-valued kernel, got {}",
            w.tag()
        )));
    }
    let upper = sample_upper(n, seed, |i, j| w.cell_average(n, i, j));
    Ok(Graph {
        n,
        storage: binary_storage(n, &upper),
        alpha: 1.0,
        provenance: Provenance {
            model: Model::DenseRandom,
            graphon: Some(w.clone()),
            seed: Some(seed),
        },
    })
}

/// Sparse W-random graph (RS): edge probability `alpha * <min(1/alpha, W)>`.
pub fn sparse_random(w: &Graphon, n: usize, alpha: f64, seed: u64) -> Result<Graph> {
    check_size(n)?;
    let truncated = w.truncate(alpha)?;
    let upper = sample_upper(n, seed, |i, j| {
        (alpha * truncated.cell_average(n, i, j)).min(1.0)
    });
    Ok(Graph {
        n,
        storage: sparse_storage(n, &upper),
        alpha,
        provenance: Provenance {
            model: Model::SparseRandom,
            graphon: Some(w.clone()),
            seed: Some(seed),
        },
    })
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Whether `n` admits a Paley graph: prime and `1 mod 4`.
pub fn is_paley_order(n: usize) -> bool {
    is_prime(n) && n % 4 == 1
}

/// Quadratic residues `{x^2 mod n : x != 0}` as a membership table.
pub fn quadratic_residues(n: usize) -> Vec<bool> {
    let mut residue = vec![false; n];
    for x in 1..n {
        residue[x * x % n] = true;
    }
    residue
}

/// Paley graph on `Z_n`: `i ~ j` iff `i - j` is a nonzero square mod `n`.
pub fn paley(n: usize) -> Result<Graph> {
    if !is_paley_order(n) {
        return Err(Error::Precondition(format!(
            "Paley graphs need n prime with n = 1 mod 4, got {n}"
        )));
    }
    let residue = quadratic_residues(n);
    let upper: Vec<Vec<u32>> = (0..n)
        .map(|i| {
            (i + 1..n)
                .filter(|&j| residue[(j - i) % n])
                .map(|j| j as u32)
                .collect()
        })
        .collect();
    Ok(Graph {
        n,
        storage: binary_storage(n, &upper),
        alpha: 1.0,
        provenance: Provenance {
            model: Model::Paley,
            graphon: None,
            seed: None,
        },
    })
}
