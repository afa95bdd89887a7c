//! Sensor network topologies, Metropolis-weight average consensus, and
//! transmission accounting.
//!
//! Consensus rounds are barrier-synchronized: every sensor updates from the
//! previous iteration's states, then broadcasts. Reduction order inside each
//! update is fixed (self term first, then neighbors by ascending index), so
//! runs are bit-reproducible.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DMatrixView};
use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float as _;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("sensor count {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("could not draw a connected topology in {attempts} attempts")]
    NotConnected { attempts: usize },
    #[error("jitter fraction must lie in [0, 0.5), got {0}")]
    InvalidJitter(f64),
    #[error("network needs at least one sensor")]
    Empty,
    #[error("adjacency is inconsistent with positions and range")]
    InconsistentAdjacency,
    #[error("payload shape mismatch: expected {expected} rows, got {got}")]
    PayloadShape { expected: usize, got: usize },
}

/// A static sensor network: positions, communication range, and the induced
/// symmetric, irreflexive adjacency. Construction enforces connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorNetwork {
    positions: Vec<[f64; 2]>,
    comm_range: f64,
    adjacency: Vec<Vec<usize>>,
}

impl SensorNetwork {
    /// Builds the network induced by `positions` and `comm_range`: sensors
    /// within range are neighbors. Fails if the graph is not connected.
    pub fn from_positions(positions: Vec<[f64; 2]>, comm_range: f64) -> Result<Self, NetworkError> {
        if positions.is_empty() {
            return Err(NetworkError::Empty);
        }
        let adjacency = adjacency_from_positions(&positions, comm_range);
        let net = Self {
            positions,
            comm_range,
            adjacency,
        };
        if !net.is_connected() {
            return Err(NetworkError::NotConnected { attempts: 1 });
        }
        Ok(net)
    }

    /// Rebuilds a network from exported parts, validating that the adjacency
    /// matches the geometry and that the graph is connected.
    pub fn from_parts(
        positions: Vec<[f64; 2]>,
        comm_range: f64,
        adjacency: Vec<Vec<usize>>,
    ) -> Result<Self, NetworkError> {
        if positions.is_empty() {
            return Err(NetworkError::Empty);
        }
        let expected = adjacency_from_positions(&positions, comm_range);
        let mut given = adjacency;
        for nbrs in &mut given {
            nbrs.sort_unstable();
        }
        if given != expected {
            return Err(NetworkError::InconsistentAdjacency);
        }
        Self::from_positions(positions, comm_range)
    }

    pub fn num_sensors(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn position(&self, k: usize) -> [f64; 2] {
        self.positions[k]
    }

    pub fn comm_range(&self) -> f64 {
        self.comm_range
    }

    /// Neighbor indices of sensor `k`, ascending.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.adjacency[k]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn degree(&self, k: usize) -> usize {
        self.adjacency[k].len()
    }

    pub fn is_connected(&self) -> bool {
        let k = self.num_sensors();
        let mut seen = vec![false; k];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(node) = stack.pop() {
            for &nbr in &self.adjacency[node] {
                if !seen[nbr] {
                    seen[nbr] = true;
                    count += 1;
                    stack.push(nbr);
                }
            }
        }
        count == k
    }

    /// Hop counts from `source` to every sensor (breadth-first).
    pub fn hop_counts(&self, source: usize) -> Vec<usize> {
        let k = self.num_sensors();
        let mut dist = vec![usize::MAX; k];
        dist[source] = 0;
        let mut frontier = vec![source];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &node in &frontier {
                for &nbr in &self.adjacency[node] {
                    if dist[nbr] == usize::MAX {
                        dist[nbr] = dist[node] + 1;
                        next.push(nbr);
                    }
                }
            }
            frontier = next;
        }
        dist
    }
}

fn adjacency_from_positions(positions: &[[f64; 2]], comm_range: f64) -> Vec<Vec<usize>> {
    let k = positions.len();
    let mut adjacency = vec![Vec::new(); k];
    for i in 0..k {
        for j in (i + 1)..k {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            if (dx * dx + dy * dy).sqrt() <= comm_range {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    adjacency
}

/// Default number of topology redraws before giving up on connectivity.
pub const DEFAULT_CONNECTIVITY_RETRIES: usize = 100;

/// Deploys `K` sensors on a jittered grid: one per cell of a `√K × √K`
/// partition of the square area, at the cell center plus uniform jitter of
/// `±jitter_fraction·cell_side` per axis. Redraws until connected.
pub fn build_jittered_grid<R: Rng + ?Sized>(
    k: usize,
    area_side: f64,
    comm_range: f64,
    jitter_fraction: f64,
    max_retries: usize,
    rng: &mut R,
) -> Result<SensorNetwork, NetworkError> {
    if k == 0 {
        return Err(NetworkError::Empty);
    }
    let side = (k as f64).sqrt().round() as usize;
    if side * side != k {
        return Err(NetworkError::NotPerfectSquare(k));
    }
    if !(0.0..0.5).contains(&jitter_fraction) {
        return Err(NetworkError::InvalidJitter(jitter_fraction));
    }
    let cell = area_side / side as f64;
    for _ in 0..max_retries.max(1) {
        let mut positions = Vec::with_capacity(k);
        for row in 0..side {
            for col in 0..side {
                let jitter = |rng: &mut R| {
                    if jitter_fraction == 0.0 {
                        0.0
                    } else {
                        rng.random_range(-jitter_fraction * cell..jitter_fraction * cell)
                    }
                };
                let x = (col as f64 + 0.5) * cell + jitter(rng);
                let y = (row as f64 + 0.5) * cell + jitter(rng);
                positions.push([x, y]);
            }
        }
        if let Ok(net) = SensorNetwork::from_positions(positions, comm_range) {
            return Ok(net);
        }
    }
    Err(NetworkError::NotConnected {
        attempts: max_retries.max(1),
    })
}

/// Metropolis consensus weights: `ω_{kk'} = 1/(1 + max(|N_k|, |N_{k'}|))`
/// for neighbors, zero for non-neighbors, and the self weight is whatever
/// makes the row sum to one. The matrix is symmetric and doubly stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusWeights {
    self_weights: Vec<f64>,
    /// Per sensor: `(neighbor, weight)` sorted by ascending neighbor index.
    neighbor_weights: Vec<Vec<(usize, f64)>>,
}

impl ConsensusWeights {
    pub fn num_sensors(&self) -> usize {
        self.self_weights.len()
    }

    pub fn self_weight(&self, k: usize) -> f64 {
        self.self_weights[k]
    }

    pub fn neighbor_weights(&self, k: usize) -> &[(usize, f64)] {
        &self.neighbor_weights[k]
    }

    /// Dense `K×K` form, mostly for analysis and tests.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let k = self.num_sensors();
        let mut m = DMatrix::zeros(k, k);
        for i in 0..k {
            m[(i, i)] = self.self_weights[i];
            for &(j, w) in &self.neighbor_weights[i] {
                m[(i, j)] = w;
            }
        }
        m
    }
}

pub fn metropolis_weights(net: &SensorNetwork) -> ConsensusWeights {
    let k = net.num_sensors();
    let mut self_weights = vec![0.0; k];
    let mut neighbor_weights = vec![Vec::new(); k];
    for i in 0..k {
        let mut off_sum = 0.0;
        let row = &mut neighbor_weights[i];
        for &j in net.neighbors(i) {
            let w = 1.0 / (1.0 + net.degree(i).max(net.degree(j)) as f64);
            row.push((j, w));
            off_sum += w;
        }
        self_weights[i] = 1.0 - off_sum;
    }
    ConsensusWeights {
        self_weights,
        neighbor_weights,
    }
}

/// What a consensus stage carries; used to break down transmission counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsensusStage {
    /// JLF coefficients (the likelihood-consensus stage).
    JlfCoefficients,
    /// Posterior mean/correlation/weight-sum payloads (the second stage of
    /// the reduced-complexity Gaussian filter).
    PosteriorMoments,
}

/// Counts of real numbers broadcast in the network, per stage, for the
/// current time step and cumulatively.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransmissionLedger {
    step_jlf: u64,
    step_moments: u64,
    total_jlf: u64,
    total_moments: u64,
}

impl TransmissionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, stage: ConsensusStage, reals: u64) {
        match stage {
            ConsensusStage::JlfCoefficients => {
                self.step_jlf += reals;
                self.total_jlf += reals;
            }
            ConsensusStage::PosteriorMoments => {
                self.step_moments += reals;
                self.total_moments += reals;
            }
        }
    }

    /// Real numbers transmitted during the current time step, per stage.
    pub fn step_counts(&self) -> (u64, u64) {
        (self.step_jlf, self.step_moments)
    }

    pub fn step_total(&self) -> u64 {
        self.step_jlf + self.step_moments
    }

    pub fn cumulative_counts(&self) -> (u64, u64) {
        (self.total_jlf, self.total_moments)
    }

    pub fn cumulative_total(&self) -> u64 {
        self.total_jlf + self.total_moments
    }

    /// Closes the current time step, returning its total count.
    pub fn finish_step(&mut self) -> u64 {
        let total = self.step_total();
        self.step_jlf = 0;
        self.step_moments = 0;
        total
    }
}

/// Synchronous linear consensus: `ζ⁽ⁱ⁾ = ω·ζ⁽ⁱ⁻¹⁾` for `i_max` iterations.
///
/// `init` holds one row per sensor and one column per parallel scalar
/// consensus. Every iteration each sensor broadcasts its row, so the ledger
/// grows by `K · i_max · N_c`.
pub fn run_consensus(
    net: &SensorNetwork,
    weights: &ConsensusWeights,
    init: DMatrixView<'_, f64>,
    i_max: usize,
    stage: ConsensusStage,
    ledger: &mut TransmissionLedger,
) -> Result<DMatrix<f64>, NetworkError> {
    let k = net.num_sensors();
    if init.nrows() != k {
        return Err(NetworkError::PayloadShape {
            expected: k,
            got: init.nrows(),
        });
    }
    let n_c = init.ncols();
    let mut current = init.clone_owned();
    let mut next = DMatrix::zeros(k, n_c);
    for _ in 0..i_max {
        for c in 0..n_c {
            for row in 0..k {
                // Self term first, then neighbors ascending: fixed order.
                let mut acc = weights.self_weight(row) * current[(row, c)];
                for &(nbr, w) in weights.neighbor_weights(row) {
                    acc += w * current[(nbr, c)];
                }
                next[(row, c)] = acc;
            }
        }
        core::mem::swap(&mut current, &mut next);
    }
    ledger.record(stage, (k * i_max * n_c) as u64);
    Ok(current)
}

/// Stopping rules for a consensus stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// Run exactly this many iterations (deterministic communication cost).
    FixedIterations(usize),
    /// Stop once every sensor's update step shrinks below `tol` in every
    /// payload column, or after `max_iterations`, whichever first.
    Threshold { max_iterations: usize, tol: f64 },
}

/// [`run_consensus`] under a configurable stopping rule. Returns the final
/// states and the number of iterations actually executed.
pub fn run_consensus_with(
    net: &SensorNetwork,
    weights: &ConsensusWeights,
    init: DMatrixView<'_, f64>,
    rule: StoppingRule,
    stage: ConsensusStage,
    ledger: &mut TransmissionLedger,
) -> Result<(DMatrix<f64>, usize), NetworkError> {
    match rule {
        StoppingRule::FixedIterations(i_max) => {
            let out = run_consensus(net, weights, init, i_max, stage, ledger)?;
            Ok((out, i_max))
        }
        StoppingRule::Threshold {
            max_iterations,
            tol,
        } => {
            let k = net.num_sensors();
            if init.nrows() != k {
                return Err(NetworkError::PayloadShape {
                    expected: k,
                    got: init.nrows(),
                });
            }
            let n_c = init.ncols();
            let mut current = init.clone_owned();
            let mut next = DMatrix::zeros(k, n_c);
            let mut iters = 0;
            while iters < max_iterations {
                let mut max_change = 0.0f64;
                for c in 0..n_c {
                    for row in 0..k {
                        let mut acc = weights.self_weight(row) * current[(row, c)];
                        for &(nbr, w) in weights.neighbor_weights(row) {
                            acc += w * current[(nbr, c)];
                        }
                        next[(row, c)] = acc;
                        max_change = max_change.max((acc - current[(row, c)]).abs());
                    }
                }
                core::mem::swap(&mut current, &mut next);
                iters += 1;
                if max_change < tol {
                    break;
                }
            }
            ledger.record(stage, (k * iters * n_c) as u64);
            Ok((current, iters))
        }
    }
}

/// Per-sensor estimates of network-wide sums: runs average consensus on the
/// addends and scales by `K`, which every sensor knows. Row `k` of the
/// result is sensor `k`'s estimate of `Σ_k addends[k]`.
pub fn consensus_sum(
    net: &SensorNetwork,
    weights: &ConsensusWeights,
    addends: DMatrixView<'_, f64>,
    i_max: usize,
    stage: ConsensusStage,
    ledger: &mut TransmissionLedger,
) -> Result<DMatrix<f64>, NetworkError> {
    let mut out = run_consensus(net, weights, addends, i_max, stage, ledger)?;
    out *= net.num_sensors() as f64;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_node_net() -> SensorNetwork {
        SensorNetwork::from_positions(vec![[0.0, 0.0], [1.0, 0.0]], 2.0).unwrap()
    }

    fn paper_grid(jitter: f64, seed: u64) -> SensorNetwork {
        let mut rng = derive_rng(seed, &[0]);
        build_jittered_grid(25, 40.0, 18.0, jitter, 100, &mut rng).unwrap()
    }

    #[test]
    fn unjittered_grid_geometry() {
        let net = paper_grid(0.0, 1);
        assert_eq!(net.num_sensors(), 25);
        // 8 m spacing starting at 4 m offset.
        for row in 0..5 {
            for col in 0..5 {
                let p = net.position(row * 5 + col);
                assert_abs_diff_eq!(p[0], 4.0 + 8.0 * col as f64, epsilon = 1e-12);
                assert_abs_diff_eq!(p[1], 4.0 + 8.0 * row as f64, epsilon = 1e-12);
            }
        }
        // Corner sensor reaches at least three others within 18 m.
        assert!(net.degree(0) >= 3);
        assert!(net.is_connected());
    }

    #[test]
    fn range_exceeding_diameter_gives_complete_graph() {
        let mut rng = derive_rng(2, &[0]);
        let net = build_jittered_grid(4, 40.0, 100.0, 0.25, 100, &mut rng).unwrap();
        for k in 0..4 {
            assert_eq!(net.degree(k), 3);
        }
    }

    #[test]
    fn jittered_grid_is_connected_and_symmetric() {
        let net = paper_grid(0.25, 3);
        assert!(net.is_connected());
        for k in 0..net.num_sensors() {
            assert!(!net.neighbors(k).contains(&k));
            for &nbr in net.neighbors(k) {
                assert!(net.neighbors(nbr).contains(&k));
            }
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let mut rng = derive_rng(4, &[0]);
        assert!(matches!(
            build_jittered_grid(24, 40.0, 18.0, 0.25, 100, &mut rng),
            Err(NetworkError::NotPerfectSquare(24))
        ));
        assert!(matches!(
            build_jittered_grid(25, 40.0, 18.0, 0.5, 100, &mut rng),
            Err(NetworkError::InvalidJitter(_))
        ));
        // Range too small for any neighbor: disconnected after retries.
        assert!(matches!(
            build_jittered_grid(25, 40.0, 1.0, 0.0, 3, &mut rng),
            Err(NetworkError::NotConnected { attempts: 3 })
        ));
    }

    #[test]
    fn metropolis_two_nodes() {
        let w = metropolis_weights(&two_node_net());
        assert_abs_diff_eq!(w.self_weight(0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w.neighbor_weights(0)[0].1, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn metropolis_star() {
        // Center at origin with four leaves out of mutual range.
        let positions = vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [-1.0, 0.0],
            [0.0, 1.0],
            [0.0, -1.0],
        ];
        let net = SensorNetwork::from_positions(positions, 1.1).unwrap();
        let w = metropolis_weights(&net);
        assert_abs_diff_eq!(w.neighbor_weights(0)[0].1, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(w.self_weight(0), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(w.self_weight(1), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn metropolis_doubly_stochastic_on_random_graph() {
        let net = paper_grid(0.25, 5);
        let m = metropolis_weights(&net).to_matrix();
        let k = net.num_sensors();
        for i in 0..k {
            let row_sum: f64 = (0..k).map(|j| m[(i, j)]).sum();
            let col_sum: f64 = (0..k).map(|j| m[(j, i)]).sum();
            assert_abs_diff_eq!(row_sum, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(col_sum, 1.0, epsilon = 1e-12);
            for j in 0..k {
                assert!(m[(i, j)] >= 0.0);
                assert_abs_diff_eq!(m[(i, j)], m[(j, i)], epsilon = 1e-15);
                if i != j && !net.neighbors(i).contains(&j) {
                    assert_eq!(m[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn two_node_single_iteration_averages() {
        let net = two_node_net();
        let w = metropolis_weights(&net);
        let mut ledger = TransmissionLedger::new();
        let init = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        let out = run_consensus(&net, &w, init.as_view(), 1, ConsensusStage::JlfCoefficients, &mut ledger).unwrap();
        assert_abs_diff_eq!(out[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[(1, 0)], 1.0, epsilon = 1e-15);
        assert_eq!(ledger.step_total(), 2);
    }

    #[test]
    fn zero_iterations_is_identity() {
        let net = two_node_net();
        let w = metropolis_weights(&net);
        let mut ledger = TransmissionLedger::new();
        let init = DMatrix::from_column_slice(2, 2, &[0.5, -1.0, 3.0, 4.0]);
        let out = run_consensus(&net, &w, init.as_view(), 0, ConsensusStage::JlfCoefficients, &mut ledger).unwrap();
        assert_eq!(out, init);
        assert_eq!(ledger.cumulative_total(), 0);
    }

    #[test]
    fn three_node_path_matches_matvec_oracle() {
        let net =
            SensorNetwork::from_positions(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], 1.5).unwrap();
        let w = metropolis_weights(&net);
        let mut ledger = TransmissionLedger::new();
        let init = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 3.0]);
        let out = run_consensus(&net, &w, init.as_view(), 50, ConsensusStage::JlfCoefficients, &mut ledger).unwrap();

        // Independent oracle: repeated dense matrix-vector products.
        let m = w.to_matrix();
        let mut oracle = init.clone();
        for _ in 0..50 {
            oracle = &m * oracle;
        }
        for k in 0..3 {
            assert_abs_diff_eq!(out[(k, 0)], oracle[(k, 0)], epsilon = 1e-13);
        }

        // At 60 iterations every state is within 1e-9 of the average.
        let out = run_consensus(&net, &w, init.as_view(), 60, ConsensusStage::JlfCoefficients, &mut ledger).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(out[(k, 0)], 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn consensus_sum_examples() {
        // Constant addends are a fixed point: every sensor returns K·c.
        let net = paper_grid(0.25, 6);
        let w = metropolis_weights(&net);
        let mut ledger = TransmissionLedger::new();
        let init = DMatrix::from_element(25, 1, 0.4);
        let out = consensus_sum(&net, &w, init.as_view(), 3, ConsensusStage::JlfCoefficients, &mut ledger).unwrap();
        for k in 0..25 {
            assert_abs_diff_eq!(out[(k, 0)], 10.0, epsilon = 1e-12);
        }

        // Two-node complete graph, one iteration: exact sum.
        let net2 = two_node_net();
        let w2 = metropolis_weights(&net2);
        let init = DMatrix::from_column_slice(2, 1, &[1.0, 3.0]);
        let out = consensus_sum(&net2, &w2, init.as_view(), 1, ConsensusStage::JlfCoefficients, &mut ledger).unwrap();
        assert_abs_diff_eq!(out[(0, 0)], 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[(1, 0)], 4.0, epsilon = 1e-15);

        // K=25 grid, random addends, 90 iterations. (The Metropolis matrix
        // of this topology has λ₂ ≈ 0.71; 60 iterations leave ~2e-8 of
        // deviation, 90 leave ~1e-12, comfortably inside 1e-8.)
        let net = paper_grid(0.0, 7);
        let w = metropolis_weights(&net);
        let mut rng = derive_rng(7, &[1]);
        let addends = DMatrix::from_fn(25, 3, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let out = consensus_sum(&net, &w, addends.as_view(), 90, ConsensusStage::JlfCoefficients, &mut ledger).unwrap();
        for c in 0..3 {
            let truth: f64 = (0..25).map(|k| addends[(k, c)]).sum();
            for k in 0..25 {
                assert!(
                    (out[(k, c)] - truth).abs() <= 1e-8 * truth.abs().max(1.0),
                    "sensor {k} column {c}: {} vs {truth}",
                    out[(k, c)]
                );
            }
        }
    }

    #[test]
    fn ledger_counts_paper_stage() {
        // K=25, I=8, N_c=69 consensus adds exactly 13800 reals.
        let net = paper_grid(0.25, 8);
        let w = metropolis_weights(&net);
        let mut ledger = TransmissionLedger::new();
        let init = DMatrix::zeros(25, 69);
        run_consensus(&net, &w, init.as_view(), 8, ConsensusStage::JlfCoefficients, &mut ledger).unwrap();
        assert_eq!(ledger.step_total(), 13800);
        assert_eq!(ledger.finish_step(), 13800);
        assert_eq!(ledger.step_total(), 0);
        assert_eq!(ledger.cumulative_total(), 13800);
    }

    #[test]
    fn threshold_rule_stops_early() {
        let net = two_node_net();
        let w = metropolis_weights(&net);
        let mut ledger = TransmissionLedger::new();
        let init = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        let (out, iters) = run_consensus_with(
            &net,
            &w,
            init.as_view(),
            StoppingRule::Threshold {
                max_iterations: 100,
                tol: 1e-12,
            },
            ConsensusStage::JlfCoefficients,
            &mut ledger,
        )
        .unwrap();
        // Two-node Metropolis averaging converges exactly after one round,
        // so the second round observes no change and stops.
        assert_eq!(iters, 2);
        assert_abs_diff_eq!(out[(0, 0)], 1.0, epsilon = 1e-12);
        assert_eq!(ledger.cumulative_total(), 4);
    }

    #[test]
    fn spread_contraction_bounded_by_second_eigenvalue() {
        // Path graph of 8 nodes: λ₂ is far from both 1 and the roundoff
        // floor, so the bound is meaningful at 60 iterations.
        let positions: Vec<[f64; 2]> = (0..8).map(|i| [i as f64, 0.0]).collect();
        let net = SensorNetwork::from_positions(positions, 1.5).unwrap();
        let w = metropolis_weights(&net);
        let m = w.to_matrix();
        let eig = m.clone().symmetric_eigen();
        let mut lambdas: Vec<f64> = eig.eigenvalues.iter().map(|l| l.abs()).collect();
        lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let lambda2 = lambdas[1];

        let mut rng = derive_rng(9, &[2]);
        let init = DMatrix::from_fn(8, 1, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let spread = |m: &DMatrix<f64>| {
            let col = m.column(0);
            col.max() - col.min()
        };
        let s0 = spread(&init);
        let mut ledger = TransmissionLedger::new();
        let out = run_consensus(&net, &w, init.as_view(), 60, ConsensusStage::JlfCoefficients, &mut ledger).unwrap();
        assert!(spread(&out) < lambda2.powi(60) * s0 * 10.0);
    }

    #[test]
    fn export_import_round_trip_validation() {
        let net = paper_grid(0.25, 10);
        let rebuilt = SensorNetwork::from_parts(
            net.positions().to_vec(),
            net.comm_range(),
            net.adjacency().to_vec(),
        )
        .unwrap();
        assert_eq!(net, rebuilt);

        // Tampered adjacency is rejected.
        let mut bad = net.adjacency().to_vec();
        bad[0].clear();
        assert!(matches!(
            SensorNetwork::from_parts(net.positions().to_vec(), net.comm_range(), bad),
            Err(NetworkError::InconsistentAdjacency)
        ));
    }

    proptest! {
        /// Average preservation and monotone spread contraction on random
        /// connected geometric graphs.
        #[test]
        fn consensus_preserves_average_and_contracts(seed in 0u64..500, k in 2usize..12) {
            let mut rng = derive_rng(seed, &[3]);
            // A path backbone keeps the graph connected; extra range links
            // whatever else falls close.
            let positions: Vec<[f64; 2]> = (0..k)
                .map(|i| [i as f64 * 0.9, rand::Rng::random_range(&mut rng, -0.5..0.5)])
                .collect();
            let net = SensorNetwork::from_positions(positions, 1.6).unwrap();
            let w = metropolis_weights(&net);
            let init = DMatrix::from_fn(k, 1, |_, _| rand::Rng::random_range(&mut rng, -10.0..10.0));
            let mean0 = init.column(0).sum() / k as f64;
            let mut ledger = TransmissionLedger::new();
            let mut prev_spread = f64::INFINITY;
            let mut state = init.clone();
            for _ in 0..15 {
                state = run_consensus(&net, &w, state.as_view(), 1, ConsensusStage::JlfCoefficients, &mut ledger).unwrap();
                let mean = state.column(0).sum() / k as f64;
                prop_assert!((mean - mean0).abs() <= 1e-12 * mean0.abs().max(1.0));
                let spread = state.column(0).max() - state.column(0).min();
                prop_assert!(spread <= prev_spread * (1.0 + 1e-12));
                prev_spread = spread;
            }
        }
    }
}
