//! The k-means multi-subpopulation particle swarm.
//!
//! Each iteration clusters the personal-best positions with k-means and
//! steers every particle toward the best personal best of its own cluster
//! instead of the swarm-wide best. Clusters are warm-started from the
//! previous iteration's centroids, so subpopulations can merge and split
//! as particles drift.
//!
//! Random numbers are consumed in a fixed order, which makes a run
//! bit-reproducible from its seed:
//!
//! * initialization: particle by particle, all position components, then
//!   all velocity components;
//! * each step: the k-means initial draw (first step only), then particle by
//!   particle and component by component, `r1` followed by `r2`.

use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::clustering::{self, ClusterAssignment, DEFAULT_MAX_ITERS};
use crate::data::Dataset;
use crate::error::{check_len, Error, Result};
use crate::network::{self, Topology};

/// Which best position pulls a particle socially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Best personal best within the particle's cluster.
    Kmpso,
    /// Best personal best in the whole swarm (canonical PSO).
    GlobalBest,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kmpso" => Ok(Mode::Kmpso),
            "gbest" | "global-best" | "global_best" => Ok(Mode::GlobalBest),
            other => Err(format!("unknown mode {other:?} (expected kmpso or gbest)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Kmpso => "kmpso",
            Mode::GlobalBest => "gbest",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmConfig {
    pub population: usize,
    pub iterations: usize,
    pub c1: f64,
    pub c2: f64,
    pub w_start: f64,
    pub w_end: f64,
    pub clusters: usize,
    pub pos_min: f64,
    pub pos_max: f64,
    pub v_max: f64,
    pub mode: Mode,
    pub kmeans_max_iters: usize,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            population: 250,
            iterations: 150,
            c1: 2.0,
            c2: 2.0,
            w_start: 0.9,
            w_end: 0.2,
            clusters: 10,
            pos_min: -5.0,
            pos_max: 5.0,
            v_max: 5.0,
            mode: Mode::Kmpso,
            kmeans_max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.clusters == 0 {
            return fail("number of clusters must be at least 1".into());
        }
        if self.population < self.clusters {
            return fail(format!(
                "population {} is smaller than the number of clusters {}",
                self.population, self.clusters
            ));
        }
        if self.iterations == 0 {
            return fail("iterations must be at least 1".into());
        }
        if !(self.pos_min < self.pos_max) {
            return fail(format!(
                "position bounds [{}, {}] are empty",
                self.pos_min, self.pos_max
            ));
        }
        if !(self.v_max > 0.0) {
            return fail(format!("v_max must be positive, got {}", self.v_max));
        }
        if self.kmeans_max_iters == 0 {
            return fail("k-means iteration budget must be at least 1".into());
        }
        if ![self.c1, self.c2, self.w_start, self.w_end]
            .iter()
            .all(|v| v.is_finite())
        {
            return fail("acceleration and inertia coefficients must be finite".into());
        }
        Ok(())
    }
}

/// A function to minimize over fixed-length real vectors.
pub trait Objective: Sync {
    fn dimension(&self) -> usize;
    fn evaluate(&self, position: &[f64]) -> f64;
}

/// Mean squared error of a decoded network on a training set.
#[derive(Debug, Clone, Copy)]
pub struct NetworkObjective<'a> {
    topology: Topology,
    data: &'a Dataset,
}

impl<'a> NetworkObjective<'a> {
    pub fn new(topology: Topology, data: &'a Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_len(topology.n_inputs(), data.n_inputs())?;
        check_len(topology.n_outputs(), data.n_outputs())?;
        Ok(Self { topology, data })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }
}

impl Objective for NetworkObjective<'_> {
    fn dimension(&self) -> usize {
        self.topology.dimension()
    }

    fn evaluate(&self, position: &[f64]) -> f64 {
        network::mse_unchecked(position, &self.topology, self.data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub fitness: f64,
    pub pbest_position: Vec<f64>,
    pub pbest_fitness: f64,
    pub cluster_label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    /// Completed steps.
    pub t: usize,
    pub config: SwarmConfig,
    /// Most recent clustering of the personal bests.
    pub clusters: Option<ClusterAssignment>,
}

impl Swarm {
    pub fn pbests(&self) -> Vec<Vec<f64>> {
        self.particles.iter().map(|p| p.pbest_position.clone()).collect()
    }

    /// Index of the particle with the lowest personal-best fitness.
    pub fn best_index(&self) -> usize {
        best_of(&self.particles, 0..self.particles.len())
    }

    pub fn best_fitness(&self) -> f64 {
        self.particles[self.best_index()].pbest_fitness
    }
}

/// Lowest pbest fitness among `candidates`; ties go to the first index.
fn best_of(particles: &[Particle], candidates: impl IntoIterator<Item = usize>) -> usize {
    let mut iter = candidates.into_iter();
    let mut best = iter.next().expect("non-empty candidate set");
    for i in iter {
        if particles[i].pbest_fitness < particles[best].pbest_fitness {
            best = i;
        }
    }
    best
}

/// For each cluster, the index of its member with the lowest pbest fitness.
pub fn cluster_bests(particles: &[Particle], clusters: &ClusterAssignment) -> Result<Vec<usize>> {
    check_len(particles.len(), clusters.labels.len())?;
    let mut best: Vec<Option<usize>> = vec![None; clusters.k()];
    for (i, p) in particles.iter().enumerate() {
        let slot = &mut best[clusters.labels[i]];
        match slot {
            Some(b) if particles[*b].pbest_fitness <= p.pbest_fitness => {}
            _ => *slot = Some(i),
        }
    }
    best.into_iter()
        .enumerate()
        .map(|(c, b)| b.ok_or(Error::EmptyCluster(c)))
        .collect()
}

/// Linearly annealed inertia weight for step `t` of `total`.
pub fn inertia(t: usize, total: usize, w_start: f64, w_end: f64) -> Result<f64> {
    if total == 0 || t >= total {
        return Err(Error::IterationOutOfRange { t, total });
    }
    if total == 1 {
        return Ok(w_start);
    }
    Ok(w_start - (w_start - w_end) * t as f64 / (total - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityParams {
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub v_max: f64,
}

/// New velocity pulled toward the particle's pbest and toward `guide`
/// (its cluster best, or the global best). `draw` supplies the uniform
/// `[0, 1)` factors, `r1` then `r2` for each component in order.
pub fn update_velocity(
    particle: &Particle,
    guide: &[f64],
    params: &VelocityParams,
    draw: &mut impl FnMut() -> f64,
) -> Result<Vec<f64>> {
    let dim = particle.position.len();
    check_len(dim, particle.velocity.len())?;
    check_len(dim, particle.pbest_position.len())?;
    check_len(dim, guide.len())?;
    let v = (0..dim)
        .map(|d| {
            let x = particle.position[d];
            let r1 = draw();
            let r2 = draw();
            let v = params.w * particle.velocity[d]
                + params.c1 * r1 * (particle.pbest_position[d] - x)
                + params.c2 * r2 * (guide[d] - x);
            v.clamp(-params.v_max, params.v_max)
        })
        .collect();
    Ok(v)
}

/// Moves the particle by its velocity and clamps to the position bounds.
pub fn update_position(particle: &Particle, pos_min: f64, pos_max: f64) -> Vec<f64> {
    particle
        .position
        .iter()
        .zip(&particle.velocity)
        .map(|(x, v)| (x + v).clamp(pos_min, pos_max))
        .collect()
}

pub fn initialize_swarm(
    config: &SwarmConfig,
    objective: &impl Objective,
    rng: &mut impl Rng,
) -> Result<Swarm> {
    config.validate()?;
    let dim = objective.dimension();
    let mut particles: Vec<Particle> = (0..config.population)
        .map(|_| {
            let position: Vec<f64> = (0..dim)
                .map(|_| rng.gen_range(config.pos_min..=config.pos_max))
                .collect();
            let velocity: Vec<f64> = (0..dim)
                .map(|_| rng.gen_range(-config.v_max..=config.v_max))
                .collect();
            Particle {
                pbest_position: position.clone(),
                position,
                velocity,
                fitness: f64::INFINITY,
                pbest_fitness: f64::INFINITY,
                cluster_label: 0,
            }
        })
        .collect();
    particles.par_iter_mut().for_each(|p| {
        p.fitness = objective.evaluate(&p.position);
        p.pbest_fitness = p.fitness;
    });
    Ok(Swarm {
        particles,
        t: 0,
        config: config.clone(),
        clusters: None,
    })
}

fn cluster_pbests(swarm: &Swarm, rng: &mut impl Rng) -> Result<ClusterAssignment> {
    let seeds = swarm.clusters.as_ref().map(|c| c.centroids.as_slice());
    clustering::kmeans(
        &swarm.pbests(),
        swarm.config.clusters,
        seeds,
        swarm.config.kmeans_max_iters,
        rng,
    )
}

/// One iteration: cluster the pbests, pull every particle toward its
/// guide, move, re-evaluate and update personal bests.
pub fn step(swarm: &mut Swarm, objective: &impl Objective, rng: &mut impl Rng) -> Result<()> {
    let config = swarm.config.clone();
    let w = inertia(swarm.t, config.iterations, config.w_start, config.w_end)?;
    let clusters = cluster_pbests(swarm, rng)?;
    for (p, &label) in swarm.particles.iter_mut().zip(&clusters.labels) {
        p.cluster_label = label;
    }

    let guides: Vec<Vec<f64>> = match config.mode {
        Mode::Kmpso => {
            let bests = cluster_bests(&swarm.particles, &clusters)?;
            swarm
                .particles
                .iter()
                .map(|p| swarm.particles[bests[p.cluster_label]].pbest_position.clone())
                .collect()
        }
        Mode::GlobalBest => {
            let gbest = swarm.particles[swarm.best_index()].pbest_position.clone();
            vec![gbest; swarm.particles.len()]
        }
    };

    let params = VelocityParams {
        w,
        c1: config.c1,
        c2: config.c2,
        v_max: config.v_max,
    };
    let mut draw = || rng.gen::<f64>();
    for (p, guide) in swarm.particles.iter_mut().zip(&guides) {
        p.velocity = update_velocity(p, guide, &params, &mut draw)?;
        p.position = update_position(p, config.pos_min, config.pos_max);
    }

    swarm.particles.par_iter_mut().for_each(|p| {
        p.fitness = objective.evaluate(&p.position);
        if p.fitness < p.pbest_fitness {
            p.pbest_fitness = p.fitness;
            p.pbest_position.clone_from(&p.position);
        }
    });

    swarm.clusters = Some(clusters);
    swarm.t += 1;
    Ok(())
}

/// Full optimization: initialize, `iterations` steps, then a final
/// clustering of the personal bests. `observe` sees the swarm after
/// initialization and after every step.
pub fn run_observed(
    config: &SwarmConfig,
    objective: &impl Objective,
    rng: &mut impl Rng,
    mut observe: impl FnMut(&Swarm),
) -> Result<(Swarm, ClusterAssignment)> {
    let mut swarm = initialize_swarm(config, objective, rng)?;
    observe(&swarm);
    while swarm.t < config.iterations {
        step(&mut swarm, objective, rng)?;
        observe(&swarm);
    }
    let final_clusters = cluster_pbests(&swarm, rng)?;
    for (p, &label) in swarm.particles.iter_mut().zip(&final_clusters.labels) {
        p.cluster_label = label;
    }
    swarm.clusters = Some(final_clusters.clone());
    Ok((swarm, final_clusters))
}

pub fn run(
    config: &SwarmConfig,
    objective: &impl Objective,
    rng: &mut impl Rng,
) -> Result<(Swarm, ClusterAssignment)> {
    run_observed(config, objective, rng, |_| {})
}
