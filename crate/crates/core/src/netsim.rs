//! Discrete-event packet simulation over static relay topologies.
//!
//! Stations forward to a fixed next hop (their cluster head or a server).
//! Every node owns one transmit channel with a FIFO queue. A hop costs the
//! serialization time at the sender's link rate, then propagation, then a
//! fixed processing delay at the receiver. Stations do not move during a
//! run.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::traffic::Packet;
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Centralized,
    Decentralized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub mode: Mode,
    pub clustering: bool,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario {
            mode: Mode::Centralized,
            clustering: false,
        },
        Scenario {
            mode: Mode::Centralized,
            clustering: true,
        },
        Scenario {
            mode: Mode::Decentralized,
            clustering: false,
        },
        Scenario {
            mode: Mode::Decentralized,
            clustering: true,
        },
    ];

    pub fn label(&self) -> String {
        let mode = match self.mode {
            Mode::Centralized => "centralized",
            Mode::Decentralized => "decentralized",
        };
        let c = if self.clustering { "clustered" } else { "nonclustered" };
        format!("{mode}-{c}")
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// How a receiver's capacity is split among the nodes that send to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSharing {
    /// A receiver's `link_bitrate` is split among its senders in proportion
    /// to the number of stations each one forwards for (itself included).
    #[default]
    Load,
    /// Each sender gets `link_bitrate / fan_in(receiver)`.
    Receiver,
    /// Each sender gets the full `link_bitrate`.
    Dedicated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    /// Bits per second.
    pub link_bitrate: f64,
    /// Seconds per hop.
    pub processing_delay: f64,
    /// Waiting packets per node, excluding the one in service.
    pub queue_capacity: usize,
    /// Meters per second.
    pub propagation_speed: f64,
    /// Longest allowed hop, meters.
    pub range: f64,
    pub rate_sharing: RateSharing,
    /// Simulated seconds after which unresolved packets count as dropped.
    pub horizon: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            link_bitrate: 10e6,
            processing_delay: 1e-4,
            queue_capacity: 1000,
            propagation_speed: 3e8,
            range: 500.0,
            rate_sharing: RateSharing::Load,
            horizon: 3600.0,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.link_bitrate) || !pos(self.propagation_speed) || !pos(self.range) || !pos(self.horizon) {
            return Err(Error::Config(
                "link_bitrate, propagation_speed, range and horizon must be > 0".into(),
            ));
        }
        if !(self.processing_delay >= 0.0 && self.processing_delay.is_finite()) {
            return Err(Error::Config("processing_delay must be >= 0".into()));
        }
        Ok(())
    }
}

/// Table 1 values carried through for provenance. Only `range` overlaps
/// with the simulator; the routing-protocol fields are inert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub area_width: f64,
    pub area_height: f64,
    pub num_nodes: usize,
    pub range: f64,
    pub interference_model: String,
    pub modulation: String,
    pub mobility_model: String,
    pub antenna: String,
    pub energy_model: String,
    pub hello_interval: f64,
    pub expire_time: f64,
    pub initial_q: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub power_min_dbm: f64,
    pub power_max_dbm: f64,
    pub packet_size: u32,
    pub sinr_weight: f64,
    pub latency_threshold: f64,
    pub qnoise_lookback: usize,
    pub w: f64,
    pub alpha: f64,
    pub epsilon: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            area_width: 500.0,
            area_height: 500.0,
            num_nodes: 25,
            range: 500.0,
            interference_model: "orthogonal".into(),
            modulation: "bpsk".into(),
            mobility_model: "random waypoint".into(),
            antenna: "omnidirectional".into(),
            energy_model: "linear".into(),
            hello_interval: 0.1,
            expire_time: 0.3,
            initial_q: 0.0,
            min_speed: 0.0,
            max_speed: 15.0,
            power_min_dbm: 60.0,
            power_max_dbm: 80.0,
            packet_size: 1024,
            sinr_weight: 0.7,
            latency_threshold: 0.01,
            qnoise_lookback: 10,
            w: 0.5,
            alpha: 0.2,
            epsilon: 0.2,
        }
    }
}

/// Cluster structure consumed by topology construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLayout {
    pub members: Vec<Vec<usize>>,
    pub centroids: Vec<Point>,
    pub heads: Vec<usize>,
}

/// Nodes `0..num_stations` are stations; the rest are servers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub scenario: Scenario,
    pub config: TopologyConfig,
    pub num_stations: usize,
    pub positions: Vec<Point>,
    pub next_hop: Vec<Option<usize>>,
    /// Outgoing rate of each node, bits/s (0 for servers).
    pub link_rate: Vec<f64>,
    /// Outgoing propagation delay of each node, seconds.
    pub link_propagation: Vec<f64>,
}

impl Topology {
    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn is_server(&self, node: usize) -> bool {
        node >= self.num_stations
    }

    pub fn num_servers(&self) -> usize {
        self.num_nodes() - self.num_stations
    }

    /// Route from `src` to its server, both ends included.
    pub fn path(&self, src: usize) -> Vec<usize> {
        let mut p = vec![src];
        let mut n = src;
        while let Some(next) = self.next_hop[n] {
            p.push(next);
            n = next;
        }
        p
    }

    pub fn fan_in(&self, node: usize) -> usize {
        self.next_hop.iter().filter(|h| **h == Some(node)).count()
    }
}

fn validate_layout(num_stations: usize, layout: &ClusterLayout) -> Result<()> {
    let k = layout.members.len();
    if k == 0 || layout.heads.len() != k || layout.centroids.len() != k {
        return Err(Error::Topology(format!(
            "layout has {k} clusters, {} heads, {} centroids",
            layout.heads.len(),
            layout.centroids.len()
        )));
    }
    let mut owner = vec![None; num_stations];
    for (c, members) in layout.members.iter().enumerate() {
        for &s in members {
            if s >= num_stations {
                return Err(Error::Topology(format!("cluster {c} lists unknown station {s}")));
            }
            if owner[s].replace(c).is_some() {
                return Err(Error::Topology(format!("station {s} is in more than one cluster")));
            }
        }
        if !members.contains(&layout.heads[c]) {
            return Err(Error::Topology(format!(
                "head {} is not a member of cluster {c}",
                layout.heads[c]
            )));
        }
    }
    if let Some(s) = owner.iter().position(|o| o.is_none()) {
        return Err(Error::Topology(format!("station {s} belongs to no cluster")));
    }
    Ok(())
}

/// Builds the relay graph. `layout` is needed for clustered scenarios and
/// for decentralized ones (servers sit at the cluster centroids).
pub fn build_topology(
    scenario: Scenario,
    config: &TopologyConfig,
    positions: &[Point],
    center: Point,
    layout: Option<&ClusterLayout>,
) -> Result<Topology> {
    config.validate()?;
    let n = positions.len();
    let needs_layout = scenario.clustering || scenario.mode == Mode::Decentralized;
    let layout = match (needs_layout, layout) {
        (true, None) => {
            return Err(Error::Topology(format!(
                "scenario {scenario} requires a cluster layout"
            )))
        }
        (true, Some(l)) => {
            validate_layout(n, l)?;
            Some(l)
        }
        (false, _) => None,
    };
    let servers: Vec<Point> = match scenario.mode {
        Mode::Centralized => vec![center],
        Mode::Decentralized => layout.expect("checked").centroids.clone(),
    };
    let mut all = positions.to_vec();
    all.extend_from_slice(&servers);
    let cluster_of = |s: usize| -> usize {
        let l = layout.expect("checked");
        l.members
            .iter()
            .position(|m| m.contains(&s))
            .expect("layout covers all stations")
    };
    let server_of_cluster = |c: usize| -> usize {
        match scenario.mode {
            Mode::Centralized => n,
            Mode::Decentralized => n + c,
        }
    };
    let mut next_hop: Vec<Option<usize>> = vec![None; all.len()];
    for (s, hop) in next_hop.iter_mut().enumerate().take(n) {
        *hop = Some(if scenario.clustering {
            let c = cluster_of(s);
            let head = layout.expect("checked").heads[c];
            if s == head {
                server_of_cluster(c)
            } else {
                head
            }
        } else {
            match scenario.mode {
                Mode::Centralized => n,
                Mode::Decentralized => {
                    let mut best = 0;
                    for (j, srv) in servers.iter().enumerate().skip(1) {
                        if positions[s].distance_sq(srv) < positions[s].distance_sq(&servers[best]) {
                            best = j;
                        }
                    }
                    n + best
                }
            }
        });
    }
    let mut fan_in = vec![0usize; all.len()];
    for h in next_hop.iter().flatten() {
        fan_in[*h] += 1;
    }
    // Stations routed through each node, and the total offered to each receiver.
    let mut load = vec![0usize; all.len()];
    for s in 0..n {
        let mut u = s;
        while let Some(v) = next_hop[u] {
            load[u] += 1;
            u = v;
        }
    }
    let mut inbound = vec![0usize; all.len()];
    for u in 0..n {
        inbound[next_hop[u].expect("stations have a next hop")] += load[u];
    }
    let mut link_rate = vec![0.0; all.len()];
    let mut link_propagation = vec![0.0; all.len()];
    for u in 0..n {
        let v = next_hop[u].expect("stations have a next hop");
        let d = all[u].distance(&all[v]);
        if d > config.range {
            return Err(Error::Topology(format!(
                "hop {u} -> {v} spans {d:.1} m, beyond the {} m range",
                config.range
            )));
        }
        link_propagation[u] = d / config.propagation_speed;
        link_rate[u] = match config.rate_sharing {
            RateSharing::Load => config.link_bitrate * load[u] as f64 / inbound[v] as f64,
            RateSharing::Receiver => config.link_bitrate / fan_in[v] as f64,
            RateSharing::Dedicated => config.link_bitrate,
        };
    }
    Ok(Topology {
        scenario,
        config: config.clone(),
        num_stations: n,
        positions: all,
        next_hop,
        link_rate,
        link_propagation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    QueueFull,
    Horizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    ServiceStart,
    ServiceEnd,
    Delivery,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub sequence: u64,
    pub kind: EventKind,
    /// Index into the workload.
    pub packet: usize,
    pub node: usize,
}

impl Eq for SimEvent {}

// Reversed so that `BinaryHeap` pops the earliest (time, sequence).
impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.sequence.cmp(&self.sequence))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub packet_id: u64,
    pub src: usize,
    pub size: u32,
    /// Nodes visited; ends at a server when delivered.
    pub path: Vec<usize>,
    pub send_time: f64,
    pub delivery_time: Option<f64>,
    pub dropped: bool,
    pub drop_reason: Option<DropReason>,
}

impl DeliveryRecord {
    pub fn hops(&self) -> usize {
        self.path.len().saturating_sub(1)
    }

    pub fn delay(&self) -> Option<f64> {
        self.delivery_time.map(|t| t - self.send_time)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// One record per workload packet, in workload order.
    pub records: Vec<DeliveryRecord>,
    pub events_processed: u64,
    /// Every processed event, when tracing was requested.
    pub trace: Option<Vec<SimEvent>>,
}

struct Engine<'a> {
    topo: &'a Topology,
    workload: &'a [Packet],
    heap: BinaryHeap<SimEvent>,
    seq: u64,
    now: f64,
    busy: Vec<bool>,
    queues: Vec<VecDeque<usize>>,
    records: Vec<DeliveryRecord>,
    resolved: Vec<bool>,
}

impl Engine<'_> {
    fn schedule(&mut self, time: f64, kind: EventKind, packet: usize, node: usize) {
        debug_assert!(time >= self.now, "event scheduled in the past");
        self.heap.push(SimEvent {
            time,
            sequence: self.seq,
            kind,
            packet,
            node,
        });
        self.seq += 1;
    }

    fn handle(&mut self, ev: SimEvent) {
        let t = ev.time;
        let (p, node) = (ev.packet, ev.node);
        match ev.kind {
            EventKind::Arrival => {
                self.records[p].path.push(node);
                if self.topo.is_server(node) {
                    self.schedule(t, EventKind::Delivery, p, node);
                } else if !self.busy[node] {
                    self.busy[node] = true;
                    self.schedule(t, EventKind::ServiceStart, p, node);
                } else if self.queues[node].len() < self.topo.config.queue_capacity {
                    self.queues[node].push_back(p);
                } else {
                    self.schedule(t, EventKind::Drop, p, node);
                }
            }
            EventKind::ServiceStart => {
                let bits = f64::from(self.workload[p].size) * 8.0;
                self.schedule(t + bits / self.topo.link_rate[node], EventKind::ServiceEnd, p, node);
            }
            EventKind::ServiceEnd => {
                let next = self.topo.next_hop[node].expect("stations have a next hop");
                let at = t + self.topo.link_propagation[node] + self.topo.config.processing_delay;
                self.schedule(at, EventKind::Arrival, p, next);
                match self.queues[node].pop_front() {
                    Some(q) => self.schedule(t, EventKind::ServiceStart, q, node),
                    None => self.busy[node] = false,
                }
            }
            EventKind::Delivery => {
                self.records[p].delivery_time = Some(t);
                self.resolved[p] = true;
            }
            EventKind::Drop => {
                self.records[p].dropped = true;
                self.records[p].drop_reason = Some(DropReason::QueueFull);
                self.resolved[p] = true;
            }
        }
    }
}

fn validate_workload(topo: &Topology, workload: &[Packet]) -> Result<()> {
    for (i, p) in workload.iter().enumerate() {
        if p.src >= topo.num_stations {
            return Err(Error::Topology(format!(
                "packet {} has unknown source {}",
                p.packet_id, p.src
            )));
        }
        if !(p.creation_time >= 0.0 && p.creation_time.is_finite()) {
            return Err(Error::Topology(format!(
                "packet {} has invalid creation time",
                p.packet_id
            )));
        }
        if p.size == 0 {
            return Err(Error::Topology(format!("packet {} has zero size", p.packet_id)));
        }
        if i > 0 && workload[i - 1].packet_id >= p.packet_id {
            return Err(Error::Topology("packet ids must be strictly increasing".into()));
        }
    }
    Ok(())
}

pub fn run_sim(topology: &Topology, workload: &[Packet]) -> Result<SimOutput> {
    run(topology, workload, false)
}

pub fn run_sim_traced(topology: &Topology, workload: &[Packet]) -> Result<SimOutput> {
    run(topology, workload, true)
}

fn run(topo: &Topology, workload: &[Packet], trace: bool) -> Result<SimOutput> {
    validate_workload(topo, workload)?;
    let nodes = topo.num_nodes();
    let mut eng = Engine {
        topo,
        workload,
        heap: BinaryHeap::with_capacity(workload.len() * 2),
        seq: 0,
        now: 0.0,
        busy: vec![false; nodes],
        queues: vec![VecDeque::new(); nodes],
        records: workload
            .iter()
            .map(|p| DeliveryRecord {
                packet_id: p.packet_id,
                src: p.src,
                size: p.size,
                path: Vec::new(),
                send_time: p.creation_time,
                delivery_time: None,
                dropped: false,
                drop_reason: None,
            })
            .collect(),
        resolved: vec![false; workload.len()],
    };
    let mut order: Vec<usize> = (0..workload.len()).collect();
    order.sort_by(|&a, &b| {
        workload[a]
            .creation_time
            .total_cmp(&workload[b].creation_time)
            .then(workload[a].packet_id.cmp(&workload[b].packet_id))
    });
    for i in order {
        eng.schedule(workload[i].creation_time, EventKind::Arrival, i, workload[i].src);
    }
    let mut processed = 0u64;
    let mut log = trace.then(Vec::new);
    while let Some(ev) = eng.heap.pop() {
        if ev.time > topo.config.horizon {
            break;
        }
        eng.now = ev.time;
        if let Some(l) = log.as_mut() {
            l.push(ev);
        }
        eng.handle(ev);
        processed += 1;
    }
    let Engine {
        mut records, resolved, ..
    } = eng;
    for (r, done) in records.iter_mut().zip(resolved) {
        if !done {
            r.delivery_time = None;
            r.dropped = true;
            r.drop_reason = Some(DropReason::Horizon);
        }
    }
    Ok(SimOutput {
        records,
        events_processed: processed,
        trace: log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub sent: usize,
    pub delivered: usize,
    pub dropped: usize,
}

/// Checks that every workload packet has exactly one record that is either
/// delivered along its route or dropped, never both.
pub fn conservation_check(
    records: &[DeliveryRecord],
    workload: &[Packet],
    topology: &Topology,
) -> Result<ConservationReport> {
    let fail = |m: String| Err(Error::Conservation(m));
    if records.len() != workload.len() {
        return fail(format!("{} packets sent but {} records", workload.len(), records.len()));
    }
    let (mut delivered, mut dropped) = (0, 0);
    for (r, p) in records.iter().zip(workload) {
        if r.packet_id != p.packet_id || r.src != p.src {
            return fail(format!("record for packet {} is missing", p.packet_id));
        }
        match (r.dropped, r.delivery_time) {
            (true, None) => dropped += 1,
            (false, Some(t)) => {
                if t < r.send_time {
                    return fail(format!("packet {} delivered before it was sent", r.packet_id));
                }
                if r.path != topology.path(r.src) {
                    return fail(format!("packet {} took an invalid path", r.packet_id));
                }
                delivered += 1;
            }
            _ => {
                return fail(format!(
                    "packet {} is both or neither delivered and dropped",
                    r.packet_id
                ))
            }
        }
    }
    if delivered + dropped != workload.len() {
        return fail("delivered + dropped != sent".into());
    }
    Ok(ConservationReport {
        sent: workload.len(),
        delivered,
        dropped,
    })
}

pub const RECORDS_HEADER: &str = "packet_id,src,hops,send_time,delivery_time,dropped,size";

pub fn records_csv(records: &[DeliveryRecord]) -> String {
    let mut s = String::with_capacity(64 * records.len() + 64);
    s.push_str(RECORDS_HEADER);
    s.push('\n');
    for r in records {
        let delivery = r.delivery_time.map(|t| format!("{t:?}")).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{:?},{},{},{}\n",
            r.packet_id,
            r.src,
            r.hops(),
            r.send_time,
            delivery,
            r.dropped,
            r.size
        ));
    }
    s
}

pub fn write_records(path: &Path, records: &[DeliveryRecord]) -> Result<()> {
    write_atomic(path, records_csv(records).as_bytes())
}
