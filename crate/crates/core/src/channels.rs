//! Bohr-frequency decomposition of coupling operators and the frequency
//! clustering used by the unified master equation.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rdm::{max_norm, CMatrix, CouplingOperator, SystemHamiltonian};

/// Blocks smaller than this (max-norm) are treated as absent.
pub const CHANNEL_DROP_TOL: f64 = 1e-12;

/// `Π_target A Π_source`: moves population from the `source` eigen-subspace
/// to the `target` one, at Bohr frequency `ε_source − ε_target`.
#[derive(Debug, Clone)]
pub struct Transition {
    pub target: usize,
    pub source: usize,
    pub omega: f64,
    /// Index into [`ChannelSet::channels`].
    pub channel: usize,
    pub op: CMatrix,
}

impl Transition {
    pub fn is_dephasing(&self) -> bool {
        self.target == self.source
    }
}

#[derive(Debug, Clone)]
pub struct Channel {
    pub omega: f64,
    pub op: CMatrix,
}

/// Channel operators `A_{αω}` of one coupling operator.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    label: String,
    dim: usize,
    degeneracy_tol: f64,
    channels: Vec<Channel>,
    transitions: Vec<Transition>,
}

/// Splits `A` into `Σ_{ij} Π_i A Π_j` over eigen-subspaces of `H` and sums
/// the blocks sharing a Bohr frequency.
pub fn decompose(h: &SystemHamiltonian, a: &CouplingOperator) -> Result<ChannelSet> {
    if a.dim() != h.dim() {
        return Err(Error::Dimension {
            expected: h.dim(),
            found: a.dim(),
        });
    }
    let subspaces = h.subspaces();
    let tol = h.degeneracy_tol();
    let mut transitions = Vec::new();
    for (i, target) in subspaces.iter().enumerate() {
        for (j, source) in subspaces.iter().enumerate() {
            let block = &target.projector * a.matrix() * &source.projector;
            if max_norm(&block) < CHANNEL_DROP_TOL {
                continue;
            }
            let omega = if i == j { 0.0 } else { source.energy - target.energy };
            transitions.push(Transition {
                target: i,
                source: j,
                omega,
                channel: 0,
                op: block,
            });
        }
    }
    transitions.sort_by(|x, y| x.omega.total_cmp(&y.omega));

    let mut channels: Vec<Channel> = Vec::new();
    let mut anchor = f64::NAN;
    for t in transitions.iter_mut() {
        let merge = channels.last().is_some() && (t.omega - anchor).abs() <= tol;
        if merge {
            let ch = channels.last_mut().unwrap();
            ch.op += &t.op;
        } else {
            anchor = t.omega;
            channels.push(Channel {
                omega: t.omega,
                op: t.op.clone(),
            });
        }
        let idx = channels.len() - 1;
        t.channel = idx;
        t.omega = channels[idx].omega;
    }
    channels.retain(|c| max_norm(&c.op) >= CHANNEL_DROP_TOL);
    // channel indices stay valid: summed blocks of distinct subspace pairs
    // cannot cancel, so no channel is removed above
    Ok(ChannelSet {
        label: a.label().to_string(),
        dim: a.dim(),
        degeneracy_tol: tol,
        channels,
        transitions,
    })
}

impl ChannelSet {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.degeneracy_tol
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.omega).collect()
    }

    pub fn channel(&self, omega: f64) -> Option<&CMatrix> {
        self.channels
            .iter()
            .find(|c| (c.omega - omega).abs() <= self.degeneracy_tol.max(1e-12))
            .map(|c| &c.op)
    }

    /// `Σ_ω A_ω`; equals the original operator.
    pub fn reconstruct(&self) -> CMatrix {
        let mut total = CMatrix::zeros(self.dim, self.dim);
        for c in &self.channels {
            total += &c.op;
        }
        total
    }

    /// CSV table `omega,norm,cluster`.
    pub fn to_csv(&self, clusters: Option<&FrequencyClusters>) -> String {
        let mut out = String::from("# format: onerdm-channels/1\nomega,norm,cluster\n");
        for c in &self.channels {
            let cluster = clusters
                .and_then(|cl| cl.cluster_of(c.omega))
                .map(|k| k.to_string())
                .unwrap_or_default();
            let _ = writeln!(out, "{:.12e},{:.12e},{}", c.omega, max_norm(&c.op), cluster);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub members: Vec<f64>,
    pub center: f64,
}

impl Cluster {
    fn from_members(members: Vec<f64>) -> Self {
        let center = members.iter().sum::<f64>() / members.len() as f64;
        Self { members, center }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyClusters {
    clusters: Vec<Cluster>,
    threshold: f64,
}

/// Single-linkage clustering on the signed frequency axis: a new cluster
/// starts wherever the gap to the previous frequency exceeds `threshold`.
/// Centers are plain means. Threshold zero keeps every distinct frequency
/// on its own.
/// Slack on the gap rule. Bohr frequencies come from energy differences, so a
/// gap equal to the threshold on paper can land a few ulps above it.
pub const CLUSTER_GAP_SLACK: f64 = 1e-12;

pub fn cluster(freqs: &[f64], threshold: f64) -> Result<FrequencyClusters> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "clustering threshold must be non-negative, got {threshold}"
        )));
    }
    let mut sorted = freqs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for w in sorted {
        match groups.last_mut() {
            Some(g) if w - g.last().unwrap() <= threshold + CLUSTER_GAP_SLACK => g.push(w),
            _ => groups.push(vec![w]),
        }
    }
    Ok(FrequencyClusters {
        clusters: groups.into_iter().map(Cluster::from_members).collect(),
        threshold,
    })
}

impl FrequencyClusters {
    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn cluster_of(&self, omega: f64) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.members.iter().any(|&m| (m - omega).abs() <= 1e-12))
    }

    pub fn center_of(&self, omega: f64) -> Option<f64> {
        self.cluster_of(omega).map(|k| self.clusters[k].center)
    }

    /// The cluster holding ω = 0, if any.
    pub fn zero_cluster(&self) -> Option<usize> {
        self.cluster_of(0.0)
    }
}
