//! Uniform row access over in-memory and semi-external-memory backends.
//!
//! Algorithms first decide which rows of a task actually need data (points
//! pruned by clause 1 need none), then fetch exactly those ids. The
//! backend only changes where bytes come from, never the math.

use std::sync::Arc;

use crate::error::Result;
use crate::extmem::SemMatrix;
use crate::matrix::{DataMatrix, PartitionMap};
use crate::metrics::TaskStats;

#[derive(Clone)]
pub enum Source {
    Mem(Arc<DataMatrix>),
    Sem(Arc<SemMatrix>),
}

/// Reusable per-worker fetch state: the id list under request and the
/// buffer row data lands in.
#[derive(Default)]
pub struct FetchBuf {
    pub ids: Vec<u32>,
    data: Vec<f64>,
}

/// Resolved row data for one fetch; iterate `ids()` and resolve each row.
pub struct RowBlock<'a> {
    ids: &'a [u32],
    data: BlockData<'a>,
}

enum BlockData<'a> {
    Mem(&'a DataMatrix),
    Buf { data: &'a [f64], d: usize },
}

impl<'a> RowBlock<'a> {
    pub fn ids(&self) -> &'a [u32] {
        self.ids
    }

    #[inline]
    pub fn row(&self, id: usize) -> &[f64] {
        match &self.data {
            BlockData::Mem(m) => m.row(id),
            BlockData::Buf { data, d } => {
                let pos = self
                    .ids
                    .binary_search(&(id as u32))
                    .expect("row was not part of the fetch");
                &data[pos * d..(pos + 1) * d]
            }
        }
    }
}

impl Source {
    pub fn n(&self) -> usize {
        match self {
            Source::Mem(m) => m.n(),
            Source::Sem(s) => s.n(),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Source::Mem(m) => m.d(),
            Source::Sem(s) => s.d(),
        }
    }

    pub fn partition_map(&self) -> &PartitionMap {
        match self {
            Source::Mem(m) => m.partition_map(),
            Source::Sem(s) => s.partition_map(),
        }
    }

    /// Direct matrix view when the data is resident.
    pub fn matrix(&self) -> Option<&DataMatrix> {
        match self {
            Source::Mem(m) => Some(m),
            Source::Sem(_) => None,
        }
    }

    pub fn sem(&self) -> Option<&SemMatrix> {
        match self {
            Source::Mem(_) => None,
            Source::Sem(s) => Some(s),
        }
    }

    /// Resolves the ids in `buf.ids` (sorted ascending). In-memory data is
    /// served zero-copy and without touching the I/O counters.
    pub fn fetch<'a>(&'a self, buf: &'a mut FetchBuf, stats: &mut TaskStats) -> Result<RowBlock<'a>> {
        match self {
            Source::Mem(m) => Ok(RowBlock {
                ids: &buf.ids,
                data: BlockData::Mem(m),
            }),
            Source::Sem(s) => {
                s.request_rows(&buf.ids, &mut buf.data, stats)?;
                Ok(RowBlock {
                    ids: &buf.ids,
                    data: BlockData::Buf {
                        data: &buf.data,
                        d: s.d(),
                    },
                })
            }
        }
    }

    /// Serial full scan in ascending row order, batched on the SEM backend.
    pub fn scan_all(&self, stats: &mut TaskStats, mut f: impl FnMut(usize, &[f64])) -> Result<()> {
        match self {
            Source::Mem(m) => {
                for i in 0..m.n() {
                    f(i, m.row(i));
                }
                Ok(())
            }
            Source::Sem(s) => {
                let mut buf = FetchBuf::default();
                let d = s.d();
                let mut start = 0u32;
                while (start as usize) < s.n() {
                    let end = (start as usize + 8192).min(s.n()) as u32;
                    buf.ids.clear();
                    buf.ids.extend(start..end);
                    s.request_rows(&buf.ids, &mut buf.data, stats)?;
                    for (pos, &id) in buf.ids.iter().enumerate() {
                        f(id as usize, &buf.data[pos * d..(pos + 1) * d]);
                    }
                    start = end;
                }
                Ok(())
            }
        }
    }

    /// Serial fetch of one row into an owned vector.
    pub fn materialize_row(&self, id: usize, stats: &mut TaskStats) -> Result<Vec<f64>> {
        match self {
            Source::Mem(m) => Ok(m.row(id).to_vec()),
            Source::Sem(s) => {
                let mut buf = FetchBuf::default();
                buf.ids.push(id as u32);
                s.request_rows(&buf.ids, &mut buf.data, stats)?;
                Ok(buf.data)
            }
        }
    }

    /// Lazy-cache bookkeeping at the start of iteration `iter`.
    pub fn begin_iteration(&self, iter: u32) {
        if let Source::Sem(s) = self {
            s.begin_iteration(iter);
        }
    }

    /// Lazy-cache bookkeeping at the end of an iteration.
    pub fn end_iteration(&self) {
        if let Source::Sem(s) = self {
            s.end_iteration();
        }
    }
}
