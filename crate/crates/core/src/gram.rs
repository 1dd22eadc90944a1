//! Gram matrices over datasets and their CSV file format.
//!
//! File layout:
//!
//! ```text
//! # {"config": {...KernelConfig...}, "kind": "subpath"}
//! id_0,id_1,...,id_{n-1}
//! v_00,v_01,...
//! ...
//! ```
//!
//! Values are written with 17 significant digits.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic::{atomic, KernelConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{
    normalize, subpath_kernel_batch, ConfigBatch, KernelKind, PreparedTree, Scratch,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    pub item_ids: Vec<String>,
    pub config: KernelConfig,
    pub kind: KernelKind,
}

#[derive(Debug, Serialize, Deserialize)]
struct Fingerprint {
    config: KernelConfig,
    kind: KernelKind,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.clone().symmetric_eigenvalues().min()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..i).all(|j| self.values[(i, j)] == self.values[(j, i)]))
    }

    /// Rows `rows`, columns `cols` of the matrix.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.values[(rows[i], cols[j])])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_string(&Fingerprint {
            config: self.config.clone(),
            kind: self.kind,
        })
        .map_err(std::io::Error::from)?;
        writeln!(w, "# {header}")?;
        let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(&mut w);
        csv.write_record(&self.item_ids).map_err(csv_err)?;
        for i in 0..self.len() {
            let row: Vec<String> = (0..self.len())
                .map(|j| format!("{:.16e}", self.values[(i, j)]))
                .collect();
            csv.write_record(&row).map_err(csv_err)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<GramMatrix> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let json = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::GramFormat("missing '#' fingerprint line".into()))?;
        let fp: Fingerprint = serde_json::from_str(json.trim())
            .map_err(|e| Error::GramFormat(format!("bad fingerprint: {e}")))?;
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(r);
        let mut records = csv.records();
        let ids: Vec<String> = match records.next() {
            Some(rec) => rec.map_err(csv_err)?.iter().map(str::to_owned).collect(),
            None => return Err(Error::GramFormat("missing id row".into())),
        };
        let n = ids.len();
        let mut values = DMatrix::zeros(n, n);
        let mut rows = 0;
        for (i, rec) in records.enumerate() {
            let rec = rec.map_err(csv_err)?;
            if i >= n || rec.len() != n {
                return Err(Error::GramFormat(format!("row {} has wrong shape", i + 1)));
            }
            for (j, field) in rec.iter().enumerate() {
                values[(i, j)] = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::GramFormat(format!("bad number '{field}'")))?;
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::GramFormat(format!("expected {n} rows, found {rows}")));
        }
        Ok(GramMatrix {
            values,
            item_ids: ids,
            config: fp.config,
            kind: fp.kind,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GramMatrix> {
        GramMatrix::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::GramFormat(e.to_string())
}

/// Gram matrix of one kernel configuration over a dataset.
pub fn gram_matrix(ds: &Dataset, cfg: &KernelConfig, kind: KernelKind) -> Result<GramMatrix> {
    Ok(gram_matrices(ds, std::slice::from_ref(cfg), kind)?.remove(0))
}

/// Gram matrices for several configurations sharing one atomic kind.
///
/// Each unordered item pair is evaluated once for all configurations and
/// mirrored, so the results are exactly symmetric. Work is spread over the
/// current rayon pool; results do not depend on the number of workers.
pub fn gram_matrices(
    ds: &Dataset,
    configs: &[KernelConfig],
    kind: KernelKind,
) -> Result<Vec<GramMatrix>> {
    let batch = ConfigBatch::new(configs)?;
    let n = ds.len();
    let ids = ds.item_ids();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();

    let raw: Vec<Vec<f64>> = match kind {
        KernelKind::Subpath => {
            let prepared = ds
                .items
                .iter()
                .map(|item| {
                    PreparedTree::new(&item.tree).map_err(|e| Error::Item {
                        item: item.id.clone(),
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            pairs
                .par_iter()
                .map_init(Scratch::default, |scratch, &(i, j)| {
                    subpath_kernel_batch(&prepared[i], &prepared[j], &batch, scratch)
                        .map_err(|e| pair_error(&ids, i, j, e))
                })
                .collect::<Result<_>>()?
        }
        KernelKind::Rooted => pairs
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (ds.items[i].tree.root_node(), ds.items[j].tree.root_node());
                configs
                    .iter()
                    .map(|cfg| {
                        let unnormalized = KernelConfig {
                            normalize: false,
                            ..cfg.clone()
                        };
                        atomic(a, b, &unnormalized)
                    })
                    .collect::<Result<Vec<f64>>>()
                    .map_err(|e| pair_error(&ids, i, j, e))
            })
            .collect::<Result<_>>()?,
    };

    let mut out = Vec::with_capacity(configs.len());
    for (lane, cfg) in configs.iter().enumerate() {
        let mut values = DMatrix::zeros(n, n);
        for (&(i, j), v) in pairs.iter().zip(&raw) {
            values[(i, j)] = v[lane];
            values[(j, i)] = v[lane];
        }
        if cfg.normalize {
            let diag: Vec<f64> = (0..n).map(|i| values[(i, i)]).collect();
            for i in 0..n {
                for j in i..n {
                    let v = normalize(values[(i, j)], diag[i], diag[j])
                        .map_err(|e| pair_error(&ids, i, j, e))?;
                    values[(i, j)] = v;
                    values[(j, i)] = v;
                }
            }
        }
        out.push(GramMatrix {
            values,
            item_ids: ids.clone(),
            config: cfg.clone(),
            kind,
        });
    }
    Ok(out)
}

/// [`gram_matrices`] on a dedicated pool of `workers` threads.
pub fn gram_matrices_with_workers(
    ds: &Dataset,
    configs: &[KernelConfig],
    kind: KernelKind,
    workers: usize,
) -> Result<Vec<GramMatrix>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Param(format!("thread pool: {e}")))?;
    pool.install(|| gram_matrices(ds, configs, kind))
}

fn pair_error(ids: &[String], i: usize, j: usize, e: Error) -> Error {
    Error::Pair {
        a: ids[i].clone(),
        b: ids[j].clone(),
        source: Box::new(e),
    }
}
