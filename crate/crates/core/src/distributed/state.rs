use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Update, UpdateEffect};
use crate::linalg::mean;
use crate::losses::{DataPoint, LossModel};
use crate::optimizer::{pgd, GdConfig};
use crate::rng::{NamedRng, RngPosition, Seeds, StreamKind};
use crate::unlearn::publish;
use crate::{Error, Result};

use super::{reservoir_update, Change, DistConfig, PointId, PointStore};

pub const DIST_SNAPSHOT_FORMAT: &str = "unlearn-dist-state/1";

#[derive(Clone, Debug)]
struct Copy {
    /// B positions; partition `j` owns `positions[j·B/K .. (j+1)·B/K]`.
    positions: Vec<PointId>,
    params: Vec<Vec<f64>>,
    reservoir: NamedRng,
    ledger: u64,
}

impl Copy {
    fn average(&self, dim: usize) -> Vec<f64> {
        mean(self.params.iter().map(Vec::as_slice), dim)
    }
}

/// C copies of K partitioned bootstrap subsamples plus the published model.
#[derive(Clone, Debug)]
pub struct PartitionedState {
    round: usize,
    copies: Vec<Copy>,
    store: PointStore,
    dataset: Dataset,
    /// Store id of every dataset entry, aligned with `dataset.points()`.
    pool: Vec<PointId>,
    best: usize,
    published: Vec<f64>,
    noise: NamedRng,
}

/// What one copy did during an update.
#[derive(Clone, Debug, PartialEq)]
pub struct CopyRound {
    /// Replaced positions per partition (s_ij).
    pub replaced: Vec<usize>,
    /// |ind|
    pub affected: usize,
    /// Iterations run on each affected partition.
    pub iterations: usize,
    pub gradients: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistRound {
    pub round: usize,
    pub effect: UpdateEffect,
    pub copies: Vec<CopyRound>,
    pub best: usize,
}

impl DistRound {
    pub fn gradients(&self) -> u64 {
        self.copies.iter().map(|c| c.gradients).sum()
    }
}

fn gd(cfg: &DistConfig, iterations: usize) -> Result<GdConfig> {
    GdConfig::strongly_convex(&cfg.loss, iterations)
}

fn materialize(store: &PointStore, ids: &[PointId]) -> Vec<DataPoint> {
    ids.iter().map(|&id| store.get(id).clone()).collect()
}

/// Index of the parameter with least empirical loss on `data`; ties go to the lowest index.
pub fn select_best(averages: &[Vec<f64>], loss: &LossModel, data: &[DataPoint]) -> Result<usize> {
    let mut best = (0usize, f64::INFINITY);
    for (l, theta) in averages.iter().enumerate() {
        let v = loss.empirical_loss(data, theta)?;
        if v < best.1 {
            best = (l, v);
        }
    }
    Ok(best.0)
}

/// Mean of the partition parameters plus `N(0, σ²I)`.
pub fn dist_publish(params: &[Vec<f64>], sigma: f64, noise: &mut NamedRng) -> Result<Vec<f64>> {
    let dim = params.first().map(Vec::len).ok_or_else(|| Error::invalid("params", "no partitions"))?;
    publish(&mean(params.iter().map(Vec::as_slice), dim), sigma, noise)
}

/// Draws every copy's bootstrap sample, trains each partition from the origin
/// and publishes the best copy.
pub fn dist_learn(data: Dataset, cfg: &DistConfig, seeds: &Seeds) -> Result<PartitionedState> {
    if data.len() < 2 {
        return Err(Error::invalid("dataset", "learning needs at least two points"));
    }
    if cfg.bootstrap % cfg.partitions != 0 {
        return Err(Error::invalid("partitions", "K must divide B"));
    }
    if data.dim() != cfg.d {
        return Err(Error::Dimension { expected: cfg.d, found: data.dim() });
    }
    let store = PointStore::from_points(data.points().to_vec());
    let pool: Vec<PointId> = data.points().iter().map(|z| store.lookup(z).expect("interned")).collect();
    let (b, k, s) = (cfg.bootstrap, cfg.partitions, cfg.partition_size());
    let gd_cfg = gd(cfg, cfg.train_iterations)?;
    let origin = cfg.loss.space().origin();
    let exec = cfg.execution;

    let samples: Vec<Vec<PointId>> = exec.map(cfg.copies, |l| {
        let mut rng = seeds.stream(StreamKind::Bootstrap, l as u64);
        let mut positions: Vec<PointId> = (0..b).map(|_| pool[rng.rng.random_range(0..pool.len())]).collect();
        positions.shuffle(&mut seeds.stream(StreamKind::Partition, l as u64).rng);
        positions
    });
    let params = exec.try_map(cfg.copies * k, |task| {
        let (l, j) = (task / k, task % k);
        let part = materialize(&store, &samples[l][j * s..(j + 1) * s]);
        pgd(&cfg.loss, &part, &origin, &gd_cfg).map(|t| t.theta)
    })?;
    let mut params = params.into_iter();
    let copies: Vec<Copy> = samples
        .into_iter()
        .enumerate()
        .map(|(l, positions)| Copy {
            positions,
            params: params.by_ref().take(k).collect(),
            reservoir: seeds.stream(StreamKind::Reservoir, l as u64),
            ledger: (cfg.train_iterations * b) as u64,
        })
        .collect();

    let mut state = PartitionedState {
        round: 0,
        copies,
        store,
        dataset: data,
        pool,
        best: 0,
        published: Vec::new(),
        noise: seeds.stream(StreamKind::Noise, 0),
    };
    state.select_and_publish(cfg)?;
    Ok(state)
}

impl PartitionedState {
    fn select_and_publish(&mut self, cfg: &DistConfig) -> Result<()> {
        let dim = cfg.d;
        let avgs: Vec<Vec<f64>> = self.copies.iter().map(|c| c.average(dim)).collect();
        self.best = select_best(&avgs, &cfg.loss, self.dataset.points())?;
        self.published = dist_publish(&self.copies[self.best].params, cfg.sigma, &mut self.noise)?;
        Ok(())
    }

    /// Absorbs one update: reservoir edits per copy, selective re-optimization, publish.
    pub fn unlearn(&mut self, u: &Update, cfg: &DistConfig) -> Result<DistRound> {
        let i = self.round + 1;
        self.step(u, cfg).map_err(|e| e.at_round(i))
    }

    fn step(&mut self, u: &Update, cfg: &DistConfig) -> Result<DistRound> {
        let i = self.round + 1;
        let mut next = self.dataset.clone();
        let effect = next.apply(u)?;
        let change = match effect {
            UpdateEffect::Added => {
                let id = self.store.intern(&u.point);
                self.pool.push(id);
                Change::Added(id)
            }
            UpdateEffect::Removed { multiplicity } => {
                let id = self.store.lookup(&u.point).expect("present points are interned");
                let at = self.pool.iter().rposition(|&p| p == id).expect("pool mirrors dataset");
                self.pool.remove(at);
                Change::Deleted { id, multiplicity }
            }
            UpdateEffect::Absent => Change::Absent,
        };
        self.dataset = next;

        let (k, s) = (cfg.partitions, cfg.partition_size());
        let (store, pool) = (&self.store, &self.pool);
        let exec = cfg.execution;
        let mut slots: Vec<(&mut Copy, Option<Result<CopyRound>>)> = self.copies.iter_mut().map(|c| (c, None)).collect();
        exec.for_each_mut(&mut slots, |_, (copy, slot)| {
            *slot = Some(update_copy(copy, change, store, pool, cfg, i, k, s));
        });
        let results: Vec<Result<CopyRound>> = slots.into_iter().map(|(_, r)| r.expect("every copy visited")).collect();
        let copies = results.into_iter().collect::<Result<Vec<_>>>()?;
        self.round = i;
        self.select_and_publish(cfg)?;
        Ok(DistRound { round: i, effect, copies, best: self.best })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn published(&self) -> &[f64] {
        &self.published
    }

    pub fn best(&self) -> usize {
        self.best
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn copies(&self) -> usize {
        self.copies.len()
    }

    /// Per-partition parameters of copy `l`.
    pub fn params(&self, l: usize) -> &[Vec<f64>] {
        &self.copies[l].params
    }

    pub fn average(&self, l: usize) -> Vec<f64> {
        self.copies[l].average(self.dataset.dim())
    }

    /// Points of partition `j` of copy `l`, with multiplicity.
    pub fn partition(&self, l: usize, j: usize, cfg: &DistConfig) -> Vec<DataPoint> {
        let s = cfg.partition_size();
        materialize(&self.store, &self.copies[l].positions[j * s..(j + 1) * s])
    }

    /// All B sampled points of copy `l`.
    pub fn sample(&self, l: usize) -> Vec<DataPoint> {
        materialize(&self.store, &self.copies[l].positions)
    }

    pub fn copy_ledger(&self, l: usize) -> u64 {
        self.copies[l].ledger
    }

    /// Cumulative point-gradient computations over all copies.
    pub fn ledger(&self) -> u64 {
        self.copies.iter().map(|c| c.ledger).sum()
    }

    pub fn snapshot(&self) -> DistSnapshot {
        DistSnapshot {
            format: DIST_SNAPSHOT_FORMAT.to_string(),
            round: self.round,
            dim: self.dataset.dim(),
            initial_len: self.dataset.initial_len(),
            store: self.store.points().to_vec(),
            dataset: self.pool.clone(),
            copies: self
                .copies
                .iter()
                .map(|c| CopySnapshot {
                    positions: c.positions.clone(),
                    params: c.params.clone(),
                    reservoir: c.reservoir.position(),
                    ledger: c.ledger,
                })
                .collect(),
            best: self.best,
            published: self.published.clone(),
            noise: self.noise.position(),
        }
    }

    pub fn restore(snap: DistSnapshot) -> Result<Self> {
        if snap.format != DIST_SNAPSHOT_FORMAT {
            return Err(Error::Config(format!("unsupported snapshot format `{}`", snap.format)));
        }
        let store = PointStore::from_points(snap.store);
        let in_range = |ids: &[PointId]| ids.iter().all(|&id| (id as usize) < store.len());
        if !in_range(&snap.dataset) || !snap.copies.iter().all(|c| in_range(&c.positions)) {
            return Err(Error::Config("snapshot refers to points outside its store".into()));
        }
        let dataset = Dataset::with_initial_len(materialize(&store, &snap.dataset), snap.dim, snap.initial_len)?;
        let copies = snap
            .copies
            .into_iter()
            .map(|c| {
                Ok(Copy { positions: c.positions, params: c.params, reservoir: NamedRng::restore(&c.reservoir)?, ledger: c.ledger })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PartitionedState {
            round: snap.round,
            copies,
            store,
            dataset,
            pool: snap.dataset,
            best: snap.best,
            published: snap.published,
            noise: NamedRng::restore(&snap.noise)?,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn update_copy(
    copy: &mut Copy,
    change: Change,
    store: &PointStore,
    pool: &[PointId],
    cfg: &DistConfig,
    i: usize,
    k: usize,
    s: usize,
) -> Result<CopyRound> {
    let changed = reservoir_update(&mut copy.positions, change, pool, &mut copy.reservoir)?;
    let mut replaced = vec![0usize; k];
    for p in changed {
        replaced[p / s] += 1;
    }
    let ind: Vec<usize> = (0..k).filter(|&j| replaced[j] > 0).collect();
    let iterations = cfg.partition_iterations(i, ind.len());
    if ind.is_empty() {
        return Ok(CopyRound { replaced, affected: 0, iterations: 0, gradients: 0 });
    }
    let gd_cfg = gd(cfg, iterations)?;
    let positions = &copy.positions;
    let params = &copy.params;
    let fresh = cfg.execution.try_map(ind.len(), |t| {
        let j = ind[t];
        let part = materialize(store, &positions[j * s..(j + 1) * s]);
        pgd(&cfg.loss, &part, &params[j], &gd_cfg).map(|tr| tr.theta)
    })?;
    for (&j, theta) in ind.iter().zip(fresh) {
        copy.params[j] = theta;
    }
    let gradients = (ind.len() * iterations * s) as u64;
    copy.ledger += gradients;
    Ok(CopyRound { replaced, affected: ind.len(), iterations, gradients })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CopySnapshot {
    pub positions: Vec<PointId>,
    pub params: Vec<Vec<f64>>,
    pub reservoir: RngPosition,
    pub ledger: u64,
}

/// Versioned JSON state of a distributed chain; partitions reference a
/// deduplicated point store by index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistSnapshot {
    pub format: String,
    pub round: usize,
    pub dim: usize,
    pub initial_len: usize,
    pub store: Vec<DataPoint>,
    /// Current dataset as store indices, one per copy of each point.
    pub dataset: Vec<PointId>,
    pub copies: Vec<CopySnapshot>,
    pub best: usize,
    pub published: Vec<f64>,
    pub noise: RngPosition,
}
