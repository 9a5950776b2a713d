//! DC operating point and fixed-step transient analysis.
//!
//! Every element reduces to conductances plus history current sources, so
//! the nodal matrix over the free nodes is symmetric positive definite and
//! banded when nodes are created in locality order. Grounded voltage sources
//! pin their node and move to the right-hand side. Integration is
//! trapezoidal; the single step that crosses a source discontinuity is taken
//! with backward Euler to avoid the half-step lag of the trapezoidal rule.

use alloc::string::String;
use alloc::vec::Vec;

use super::band::{NotPositiveDefinite, SystemFactor, SystemMatrix};
use super::netlist::{Element, Netlist, NodeId, ProbeKind, SourceWave};
use super::CircuitError;


/// Normalized drive level of one lane at time `t`.
pub trait DriveSignal {
    fn level(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> DriveSignal for F {
    fn level(&self, t: f64) -> f64 {
        self(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientConfig {
    pub dt: f64,
    pub t_stop: f64,
    /// Leading interval the analysis should discard; carried into the output.
    pub settle_time: f64,
    /// Record every `record_stride`-th step.
    pub record_stride: usize,
    /// Compute the KCL residual at every step.
    pub check_kcl: bool,
}

impl TransientConfig {
    pub fn new(dt: f64, t_stop: f64) -> Self {
        TransientConfig {
            dt,
            t_stop,
            settle_time: 0.0,
            record_stride: 1,
            check_kcl: false,
        }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CircuitError::Config(alloc::format!(
                "time step {} must be positive",
                self.dt
            )));
        }
        if !(self.t_stop >= self.dt) {
            return Err(CircuitError::Config(alloc::format!(
                "stop time {} is shorter than one step",
                self.t_stop
            )));
        }
        if self.record_stride == 0 {
            return Err(CircuitError::Config(
                "record stride must be at least 1".into(),
            ));
        }
        if !(self.settle_time >= 0.0) {
            return Err(CircuitError::Config(
                "settle time must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub steps: usize,
    pub factorizations: usize,
    /// Largest KCL residual seen (A), when checking is enabled.
    pub max_kcl_residual: f64,
    /// Largest branch current seen (A), when checking is enabled.
    pub max_branch_current: f64,
}

/// Uniformly sampled probe traces.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    pub dt: f64,
    pub settle_time: f64,
    names: Vec<String>,
    traces: Vec<Vec<f64>>,
    pub stats: SolveStats,
}

impl WaveformSet {
    pub fn new(dt: f64, settle_time: f64, names: Vec<String>, traces: Vec<Vec<f64>>) -> Self {
        WaveformSet {
            dt,
            settle_time,
            names,
            traces,
            stats: SolveStats::default(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn traces(&self) -> &[Vec<f64>] {
        &self.traces
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.traces[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.traces.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.dt
    }
}

/// Node voltages and branch currents at the DC operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct DcSolution {
    voltages: Vec<f64>,
    names: Vec<String>,
    /// Per element: inductor current (`a` to `b`), or the current entering
    /// the near end of a line; zero otherwise.
    branch: Vec<f64>,
}

impl DcSolution {
    pub fn voltage(&self, node: NodeId) -> f64 {
        self.voltages[node.index()]
    }

    pub fn voltage_of(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.voltages[i])
    }

    pub fn voltages(&self) -> &[f64] {
        &self.voltages
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Ground,
    Known,
    Free(usize),
}

struct Layout {
    slots: Vec<Slot>,
    free: usize,
    /// Half bandwidth of the interior block.
    bandwidth: usize,
    /// Hub unknowns ordered last.
    border: usize,
}

/// Half bandwidth over interior nodes after compacting out the border, and
/// the element group that sets it.
fn band_of(groups: &[Vec<usize>], in_border: &[bool]) -> (usize, Option<usize>) {
    let mut pos = alloc::vec![0usize; in_border.len()];
    let mut next = 0;
    for (k, &b) in in_border.iter().enumerate() {
        pos[k] = next;
        if !b {
            next += 1;
        }
    }
    let mut bw = 0;
    let mut widest = None;
    for (gi, g) in groups.iter().enumerate() {
        let mut inner = g.iter().filter(|&&k| !in_border[k]).map(|&k| pos[k]);
        let Some(first) = inner.next() else { continue };
        let (lo, hi) = inner.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p)));
        if hi - lo > bw {
            bw = hi - lo;
            widest = Some(gi);
        }
    }
    (bw, widest)
}

/// Largest number of hub nodes moved to the dense border.
const MAX_BORDER: usize = 64;

impl Layout {
    /// Free nodes keep their creation order, except that nodes tied to far
    /// away neighbours (via bumps shared by many cells) are moved to a dense
    /// border when that makes factoring cheaper.
    fn new(netlist: &Netlist) -> Self {
        let n = netlist.node_count();
        let mut held = alloc::vec![false; n];
        for e in netlist.elements() {
            if let Element::VoltageSource { node, .. } = e {
                held[node.index()] = true;
            }
        }
        let free_nodes: Vec<usize> = (1..n).filter(|&i| !held[i]).collect();
        let mut order = alloc::vec![usize::MAX; n];
        for (k, &i) in free_nodes.iter().enumerate() {
            order[i] = k;
        }
        let groups: Vec<Vec<usize>> = netlist
            .elements()
            .iter()
            .map(|e| {
                let nodes: Vec<NodeId> = match *e {
                    Element::TransmissionLine { near, far, .. } => alloc::vec![near, far],
                    _ => e.terminals(),
                };
                let mut g: Vec<usize> = nodes
                    .iter()
                    .map(|nd| order[nd.index()])
                    .filter(|&k| k != usize::MAX)
                    .collect();
                g.sort_unstable();
                g.dedup();
                g
            })
            .filter(|g| g.len() > 1)
            .collect();
        let free = free_nodes.len();
        let mut degree = alloc::vec![0usize; free];
        for g in &groups {
            for &k in g {
                degree[k] += g.len() - 1;
            }
        }

        let mut in_border = alloc::vec![false; free];
        let mut border: Vec<usize> = Vec::new();
        let cost = |bw: usize, h: usize| (bw + 1) * (bw + 1) + (bw + 1) * h + h * h;
        let (mut bw, mut widest) = band_of(&groups, &in_border);
        let mut best = (cost(bw, 0), 0usize);
        while border.len() < MAX_BORDER.min(free / 4) {
            let Some(g) = widest else { break };
            let mut inner = groups[g].iter().copied().filter(|&k| !in_border[k]);
            let (Some(a), Some(b)) = (inner.next(), inner.last()) else {
                break;
            };
            let pick = if degree[b] >= degree[a] { b } else { a };
            in_border[pick] = true;
            border.push(pick);
            (bw, widest) = band_of(&groups, &in_border);
            let c = cost(bw, border.len());
            if c < best.0 {
                best = (c, border.len());
            }
        }
        for &k in &border[best.1..] {
            in_border[k] = false;
        }
        border.truncate(best.1);
        let (bw, _) = band_of(&groups, &in_border);

        let mut slots = alloc::vec![Slot::Known; n];
        slots[0] = Slot::Ground;
        let interior = free - border.len();
        let mut next = 0;
        for (k, &i) in free_nodes.iter().enumerate() {
            if !in_border[k] {
                slots[i] = Slot::Free(next);
                next += 1;
            }
        }
        for (r, &k) in border.iter().enumerate() {
            slots[free_nodes[k]] = Slot::Free(interior + r);
        }
        Layout {
            slots,
            free,
            bandwidth: bw,
            border: border.len(),
        }
    }

    fn free_index(&self, node: NodeId) -> Option<usize> {
        match self.slots[node.index()] {
            Slot::Free(i) => Some(i),
            _ => None,
        }
    }

    fn node_of_free(&self, index: usize) -> usize {
        self.slots
            .iter()
            .position(|s| *s == Slot::Free(index))
            .unwrap_or(0)
    }
}

/// Routes stamps to the matrix (free-free couplings) and to the right-hand
/// side (free-known couplings, evaluated with the current known voltages).
struct Stamper<'a> {
    layout: &'a Layout,
    v: &'a [f64],
    matrix: Option<&'a mut SystemMatrix>,
    rhs: &'a mut [f64],
}

impl Stamper<'_> {
    fn conductance(&mut self, a: NodeId, b: NodeId, g: f64) {
        self.lever(&[a, b], &[1.0, -1.0], g);
    }

    /// Stamps `g * c c^T` over `nodes`.
    fn lever(&mut self, nodes: &[NodeId], c: &[f64], g: f64) {
        for (p, &np) in nodes.iter().enumerate() {
            let Some(ip) = self.layout.free_index(np) else {
                continue;
            };
            for (q, &nq) in nodes.iter().enumerate() {
                let gpq = g * c[p] * c[q];
                match self.layout.slots[nq.index()] {
                    Slot::Free(iq) => {
                        if let Some(m) = self.matrix.as_deref_mut() {
                            m.add(ip, iq, gpq);
                        }
                    }
                    Slot::Known => self.rhs[ip] -= gpq * self.v[nq.index()],
                    Slot::Ground => {}
                }
            }
        }
    }

    fn driver(&mut self, nodes: [NodeId; 3], s: f64, r_out: f64, overlap: f64) {
        let g = 1.0 / r_out;
        self.lever(&nodes, &driver_coeffs(s), g);
        self.conductance(nodes[0], nodes[1], overlap * s * (1.0 - s) * g);
    }

    /// Matrix part of [`Stamper::driver`] only; right-hand side untouched.
    fn driver_matrix(&mut self, nodes: [NodeId; 3], s: f64, r_out: f64, overlap: f64) {
        let Some(m) = self.matrix.as_deref_mut() else {
            return;
        };
        let g = 1.0 / r_out;
        let c = driver_coeffs(s);
        let gc = overlap * s * (1.0 - s) * g;
        let cb = [1.0, -1.0, 0.0];
        for (p, &np) in nodes.iter().enumerate() {
            let Some(ip) = self.layout.free_index(np) else {
                continue;
            };
            for (q, &nq) in nodes.iter().enumerate() {
                if let Some(iq) = self.layout.free_index(nq) {
                    m.add(ip, iq, g * c[p] * c[q] + gc * cb[p] * cb[q]);
                }
            }
        }
    }

    /// Current `i` flowing from `a` to `b` through an element.
    fn current(&mut self, a: NodeId, b: NodeId, i: f64) {
        if let Some(ia) = self.layout.free_index(a) {
            self.rhs[ia] -= i;
        }
        if let Some(ib) = self.layout.free_index(b) {
            self.rhs[ib] += i;
        }
    }
}

fn source_value(
    wave: &SourceWave,
    t: f64,
    drives: &[&dyn DriveSignal],
) -> Result<f64, CircuitError> {
    Ok(match *wave {
        SourceWave::Dc(v) => v,
        SourceWave::Step { from, to, at } => {
            if t <= at {
                from
            } else {
                to
            }
        }
        SourceWave::Drive { lane, low, high } => {
            let d = drives.get(lane).ok_or(CircuitError::MissingDrive {
                lane,
                available: drives.len(),
            })?;
            low + (high - low) * d.level(t)
        }
    })
}

fn set_sources(
    netlist: &Netlist,
    t: f64,
    drives: &[&dyn DriveSignal],
    v: &mut [f64],
) -> Result<(), CircuitError> {
    for e in netlist.elements() {
        if let Element::VoltageSource { node, wave } = e {
            v[node.index()] = source_value(wave, t, drives)?;
        }
    }
    Ok(())
}

fn drive_level(v: &[f64], input: NodeId, swing: f64) -> f64 {
    (v[input.index()] / swing).clamp(0.0, 1.0)
}

fn driver_coeffs(s: f64) -> [f64; 3] {
    [s, 1.0 - s, -1.0]
}

fn singular(netlist: &Netlist, layout: &Layout, err: NotPositiveDefinite) -> CircuitError {
    let node = layout.node_of_free(err.0);
    CircuitError::Singular {
        node: netlist.node_name(NodeId(node)).into(),
    }
}

/// Inductors without series resistance and lines: zero-ohm paths at DC.
fn dc_short(e: &Element) -> Option<(NodeId, NodeId)> {
    match *e {
        Element::Inductor {
            a, b, series_ohms, ..
        } if series_ohms == 0.0 => Some((a, b)),
        Element::TransmissionLine { near, far, .. } => Some((near, far)),
        _ => None,
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Solves the DC point with shorted nodes merged into one unknown, fills in
/// every free node of `v` and returns the DC branch currents.
fn dc_solve(netlist: &Netlist, v: &mut [f64]) -> Result<Vec<f64>, CircuitError> {
    let n = netlist.node_count();
    let elements = netlist.elements();
    let mut held = alloc::vec![false; n];
    held[0] = true;
    for e in elements {
        if let Element::VoltageSource { node, .. } = e {
            held[node.index()] = true;
        }
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for e in elements {
        let Some((a, b)) = dc_short(e) else { continue };
        let (ra, rb) = (find(&mut parent, a.index()), find(&mut parent, b.index()));
        if ra == rb {
            continue;
        }
        if held[ra] && held[rb] {
            return Err(CircuitError::InvalidNetlist(alloc::format!(
                "nodes {} and {} are both held by sources and shorted at DC",
                netlist.node_name(NodeId(ra)),
                netlist.node_name(NodeId(rb))
            )));
        }
        // a held node always stays the representative
        if held[rb] {
            parent[ra] = rb;
        } else {
            parent[rb] = ra;
        }
    }
    let rep: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();

    // Same nodes, shorts removed, merged nodes parked behind dummy sources.
    let mut reduced = Netlist::new();
    for i in 1..n {
        reduced.add_node(netlist.node_name(NodeId(i)));
    }
    let map = |x: NodeId| NodeId(rep[x.index()]);
    for e in elements {
        if dc_short(e).is_some() {
            continue;
        }
        reduced.add(match e.clone() {
            Element::Resistor { a, b, ohms } => Element::Resistor {
                a: map(a),
                b: map(b),
                ohms,
            },
            Element::Inductor {
                a,
                b,
                henries,
                series_ohms,
            } => Element::Inductor {
                a: map(a),
                b: map(b),
                henries,
                series_ohms,
            },
            Element::Capacitor { .. } => continue,
            Element::Driver {
                input,
                vdd,
                vss,
                out,
                r_out,
                input_swing,
                overlap,
            } => Element::Driver {
                input: map(input),
                vdd: map(vdd),
                vss: map(vss),
                out: map(out),
                r_out,
                input_swing,
                overlap,
            },
            other => other,
        });
    }
    for i in 1..n {
        if rep[i] != i && !held[i] {
            reduced.source(NodeId(i), SourceWave::Dc(0.0));
        }
    }

    let layout = Layout::new(&reduced);
    let mut m = SystemMatrix::zeros(layout.free, layout.bandwidth, layout.border);
    let mut rhs = alloc::vec![0.0; layout.free];
    {
        let mut st = Stamper {
            layout: &layout,
            v,
            matrix: Some(&mut m),
            rhs: &mut rhs,
        };
        for e in reduced.elements() {
            match *e {
                Element::Resistor { a, b, ohms } => st.conductance(a, b, 1.0 / ohms),
                Element::Inductor {
                    a, b, series_ohms, ..
                } => st.conductance(a, b, 1.0 / series_ohms),
                Element::Driver {
                    input,
                    vdd,
                    vss,
                    out,
                    r_out,
                    input_swing,
                    overlap,
                } => {
                    let s = drive_level(st.v, input, input_swing);
                    st.driver([vdd, vss, out], s, r_out, overlap)
                }
                _ => {}
            }
        }
    }
    let chol = m.factor().map_err(|e| singular(netlist, &layout, e))?;
    chol.solve_in_place(&mut rhs);
    for (i, slot) in layout.slots.iter().enumerate() {
        if let Slot::Free(k) = slot {
            v[i] = rhs[*k];
        }
    }
    for i in 1..n {
        if rep[i] != i && !held[i] {
            v[i] = v[rep[i]];
        }
    }

    let mut branch = alloc::vec![0.0; elements.len()];
    // current leaving each node through the non-short elements
    let mut out = alloc::vec![0.0; n];
    for (k, e) in elements.iter().enumerate() {
        match *e {
            Element::Resistor { a, b, ohms } => {
                let i = (v[a.index()] - v[b.index()]) / ohms;
                out[a.index()] += i;
                out[b.index()] -= i;
            }
            Element::Inductor {
                a, b, series_ohms, ..
            } if series_ohms > 0.0 => {
                let i = (v[a.index()] - v[b.index()]) / series_ohms;
                branch[k] = i;
                out[a.index()] += i;
                out[b.index()] -= i;
            }
            Element::Driver {
                input,
                vdd,
                vss,
                out: pad,
                r_out,
                input_swing,
                overlap,
            } => {
                let s = drive_level(v, input, input_swing);
                let (hi, lo) = (v[vdd.index()], v[vss.index()]);
                let i = (s * hi + (1.0 - s) * lo - v[pad.index()]) / r_out;
                let i_overlap = overlap * s * (1.0 - s) * (hi - lo) / r_out;
                out[pad.index()] -= i;
                out[vdd.index()] += s * i + i_overlap;
                out[vss.index()] += (1.0 - s) * i - i_overlap;
            }
            _ => {}
        }
    }
    // Short currents from KCL over a spanning tree of each merged group,
    // rooted at the representative; shorts closing a loop carry nothing.
    let mut adjacent: Vec<Vec<(usize, usize)>> = alloc::vec![Vec::new(); n];
    for (k, e) in elements.iter().enumerate() {
        if let Some((a, b)) = dc_short(e) {
            if a != b {
                adjacent[a.index()].push((k, b.index()));
                adjacent[b.index()].push((k, a.index()));
            }
        }
    }
    let mut seen = alloc::vec![false; n];
    for root in 0..n {
        if rep[root] != root || adjacent[root].is_empty() {
            continue;
        }
        // (node, element to its parent, parent)
        let mut order: Vec<(usize, usize, usize)> = alloc::vec![(root, usize::MAX, root)];
        seen[root] = true;
        let mut head = 0;
        while head < order.len() {
            let x = order[head].0;
            head += 1;
            for &(k, y) in &adjacent[x] {
                if !seen[y] {
                    seen[y] = true;
                    order.push((y, k, x));
                }
            }
        }
        for &(x, k, p) in order.iter().skip(1).rev() {
            // current from the parent into x through element k
            let i = out[x];
            out[p] += i;
            out[x] = 0.0;
            let (a, _) = dc_short(&elements[k]).unwrap_or((NodeId(p), NodeId(x)));
            branch[k] = if a.index() == p { i } else { -i };
        }
    }
    Ok(branch)
}

/// DC operating point with every drive lane at level 0: inductors shorted,
/// capacitors open, lines as shorts.
pub fn dc_operating_point(netlist: &Netlist) -> Result<DcSolution, CircuitError> {
    let zero = |_t: f64| 0.0;
    let lanes = netlist.drive_lanes();
    let drives: Vec<&dyn DriveSignal> = (0..lanes).map(|_| &zero as &dyn DriveSignal).collect();
    dc_operating_point_with(netlist, &drives)
}

/// DC operating point with the drive levels taken at `t = 0`.
pub fn dc_operating_point_with(
    netlist: &Netlist,
    drives: &[&dyn DriveSignal],
) -> Result<DcSolution, CircuitError> {
    netlist.validate()?;
    let mut v = alloc::vec![0.0; netlist.node_count()];
    set_sources(netlist, 0.0, drives, &mut v)?;
    let branch = dc_solve(netlist, &mut v)?;
    let names = (0..netlist.node_count())
        .map(|i| netlist.node_name(NodeId(i)).into())
        .collect();
    Ok(DcSolution {
        voltages: v,
        names,
        branch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rule {
    Trapezoidal,
    BackwardEuler,
}

struct Line {
    element: usize,
    z0: f64,
    delay_steps: f64,
    // wave quantities v + z0 * i at each end, indexed by step modulo len
    w_near: Vec<f64>,
    w_far: Vec<f64>,
}

impl Line {
    fn at(buf: &[f64], step: i64, initial: f64) -> f64 {
        if step < 0 {
            initial
        } else {
            buf[step as usize % buf.len()]
        }
    }

    /// Delayed wave from `buf` for the step being computed (`step`).
    fn delayed(&self, buf: &[f64], step: usize, initial: f64) -> f64 {
        let x = step as f64 - self.delay_steps;
        let p = libm::floor(x);
        let f = x - p;
        let p = p as i64;
        let w0 = Self::at(buf, p, initial);
        if f < 1e-12 {
            w0
        } else {
            let w1 = Self::at(buf, p + 1, initial);
            w0 + (w1 - w0) * f
        }
    }
}

/// Fixed-step transient solution starting from the DC operating point.
///
/// `drives[k]` supplies the level of every `SourceWave::Drive` with lane `k`.
pub fn transient(
    netlist: &Netlist,
    drives: &[&dyn DriveSignal],
    config: &TransientConfig,
) -> Result<WaveformSet, CircuitError> {
    config.validate()?;
    netlist.validate()?;
    let dt = config.dt;
    for (i, e) in netlist.elements().iter().enumerate() {
        if let Element::TransmissionLine { delay, .. } = *e {
            if delay < dt {
                return Err(CircuitError::Config(alloc::format!(
                    "line element {i} delay {delay:e} s is shorter than the time step {dt:e} s"
                )));
            }
        }
    }
    let layout = Layout::new(netlist);
    let nodes = netlist.node_count();
    let elements = netlist.elements();

    let mut v = alloc::vec![0.0; nodes];
    set_sources(netlist, 0.0, drives, &mut v)?;
    let dc_branch = dc_solve(netlist, &mut v)?;

    // branch state: inductor and capacitor currents; line near-end currents
    let mut branch = dc_branch.clone();
    for (i, e) in elements.iter().enumerate() {
        if matches!(e, Element::Capacitor { .. }) {
            branch[i] = 0.0;
        }
    }
    let mut lines: Vec<Line> = Vec::new();
    let mut line_of = alloc::vec![usize::MAX; elements.len()];
    let mut line_initial: Vec<(f64, f64)> = Vec::new();
    for (i, e) in elements.iter().enumerate() {
        if let Element::TransmissionLine {
            near,
            far,
            z0,
            delay,
        } = *e
        {
            let i_near = dc_branch[i];
            let w_near = v[near.index()] + z0 * i_near;
            let w_far = v[far.index()] - z0 * i_near;
            let delay_steps = delay / dt;
            let len = libm::ceil(delay_steps) as usize + 2;
            line_of[i] = lines.len();
            line_initial.push((w_near, w_far));
            lines.push(Line {
                element: i,
                z0,
                delay_steps,
                w_near: alloc::vec![w_near; len],
                w_far: alloc::vec![w_far; len],
            });
        }
    }
    let mut line_far_current = alloc::vec![0.0; lines.len()];
    for (k, line) in lines.iter().enumerate() {
        line_far_current[k] = -dc_branch[line.element];
    }

    let steps = libm::round(config.t_stop / dt) as usize;
    let stride = config.record_stride;
    let names: Vec<String> = netlist.probes().iter().map(|p| p.name.clone()).collect();
    let mut traces: Vec<Vec<f64>> = (0..names.len())
        .map(|_| Vec::with_capacity(steps / stride + 1))
        .collect();
    let record = |traces: &mut Vec<Vec<f64>>, v: &[f64], branch: &[f64]| {
        for (p, trace) in netlist.probes().iter().zip(traces.iter_mut()) {
            trace.push(match &p.kind {
                ProbeKind::Voltage(n) => v[n.index()],
                ProbeKind::BranchCurrent(ids) => ids.iter().map(|id| branch[id.index()]).sum(),
            });
        }
    };
    record(&mut traces, &v, &branch);

    let step_times: Vec<f64> = elements
        .iter()
        .filter_map(|e| match e {
            Element::VoltageSource {
                wave: SourceWave::Step { at, .. },
                ..
            } => Some(*at),
            _ => None,
        })
        .collect();

    let static_trap = static_matrix(&layout, nodes, elements, Rule::Trapezoidal, dt);
    let static_be = if step_times.is_empty() {
        None
    } else {
        Some(static_matrix(
            &layout,
            nodes,
            elements,
            Rule::BackwardEuler,
            dt,
        ))
    };

    let drivers: Vec<usize> = elements
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e, Element::Driver { .. }))
        .map(|(i, _)| i)
        .collect();
    let mut factored_levels: Vec<f64> = alloc::vec![f64::NAN; drivers.len()];
    let mut factored_rule = Rule::Trapezoidal;
    let mut factor: Option<SystemFactor> = None;
    let mut assembled = SystemMatrix::zeros(0, 0, 0);
    let mut levels = alloc::vec![0.0; drivers.len()];
    let mut rhs = alloc::vec![0.0; layout.free];
    let mut history = alloc::vec![0.0; elements.len()];
    let mut stats = SolveStats::default();
    let mut t_prev = 0.0;

    for n in 1..=steps {
        let t = n as f64 * dt;
        let rule = if step_times.iter().any(|&at| at >= t_prev && at < t) {
            Rule::BackwardEuler
        } else {
            Rule::Trapezoidal
        };

        // history sources from the state at t_prev, before the sources move
        for (i, e) in elements.iter().enumerate() {
            history[i] = match *e {
                Element::Inductor {
                    a,
                    b,
                    henries,
                    series_ohms,
                } => {
                    let g = inductor_geq(rule, henries, series_ohms, dt);
                    match rule {
                        Rule::Trapezoidal => {
                            g * (v[a.index()] - v[b.index()]
                                + (2.0 * henries / dt - series_ohms) * branch[i])
                        }
                        Rule::BackwardEuler => g * (henries / dt) * branch[i],
                    }
                }
                Element::Capacitor { a, b, farads } => {
                    let g = capacitor_geq(rule, farads, dt);
                    match rule {
                        Rule::Trapezoidal => -g * (v[a.index()] - v[b.index()]) - branch[i],
                        Rule::BackwardEuler => -g * (v[a.index()] - v[b.index()]),
                    }
                }
                _ => 0.0,
            };
        }

        set_sources(netlist, t, drives, &mut v)?;
        for (k, &di) in drivers.iter().enumerate() {
            if let Element::Driver {
                input, input_swing, ..
            } = elements[di]
            {
                levels[k] = drive_level(&v, input, input_swing);
            }
        }

        let refactor = factor.is_none()
            || rule != factored_rule
            || levels
                .iter()
                .zip(&factored_levels)
                .any(|(a, b)| a.to_bits() != b.to_bits());
        if refactor {
            let base = match (rule, &static_be) {
                (Rule::BackwardEuler, Some(be)) => be,
                _ => &static_trap,
            };
            let mut work = match factor.take() {
                Some(old) => old.into_storage(),
                None => SystemMatrix::zeros(layout.free, layout.bandwidth, layout.border),
            };
            work.copy_from(base);
            for (k, &di) in drivers.iter().enumerate() {
                if let Element::Driver {
                    vdd,
                    vss,
                    out,
                    r_out,
                    overlap,
                    ..
                } = elements[di]
                {
                    let mut scratch = [0.0; 0];
                    let mut st = Stamper {
                        layout: &layout,
                        v: &[],
                        matrix: Some(&mut work),
                        rhs: &mut scratch,
                    };
                    st.driver_matrix([vdd, vss, out], levels[k], r_out, overlap);
                }
            }
            if config.check_kcl {
                assembled = work.clone();
            }
            factor = Some(work.factor().map_err(|e| singular(netlist, &layout, e))?);
            factored_levels.copy_from_slice(&levels);
            factored_rule = rule;
            stats.factorizations += 1;
        }

        rhs.iter_mut().for_each(|r| *r = 0.0);
        let mut line_sources: Vec<(f64, f64)> = Vec::with_capacity(lines.len());
        {
            let mut st = Stamper {
                layout: &layout,
                v: &v,
                matrix: None,
                rhs: &mut rhs,
            };
            for (i, e) in elements.iter().enumerate() {
                match *e {
                    Element::Resistor { a, b, ohms } => st.conductance(a, b, 1.0 / ohms),
                    Element::Inductor {
                        a,
                        b,
                        henries,
                        series_ohms,
                    } => {
                        st.conductance(a, b, inductor_geq(rule, henries, series_ohms, dt));
                        st.current(a, b, history[i]);
                    }
                    Element::Capacitor { a, b, farads } => {
                        st.conductance(a, b, capacitor_geq(rule, farads, dt));
                        st.current(a, b, history[i]);
                    }
                    Element::TransmissionLine { near, far, .. } => {
                        let line = &lines[line_of[i]];
                        let (init_near, init_far) = line_initial[line_of[i]];
                        let e_near = line.delayed(&line.w_far, n, init_far);
                        let e_far = line.delayed(&line.w_near, n, init_near);
                        // i_near = v_near / z0 - e_near / z0
                        st.current(NodeId::GROUND, near, e_near / line.z0);
                        st.current(NodeId::GROUND, far, e_far / line.z0);
                        line_sources.push((e_near, e_far));
                    }
                    Element::Driver {
                        vdd,
                        vss,
                        out,
                        r_out,
                        input,
                        input_swing,
                        overlap,
                    } => {
                        let s = drive_level(st.v, input, input_swing);
                        st.driver([vdd, vss, out], s, r_out, overlap);
                    }
                    Element::VoltageSource { .. } => {}
                }
            }
        }

        let rhs_copy = if config.check_kcl {
            Some(rhs.clone())
        } else {
            None
        };
        if let Some(chol) = factor.as_ref() {
            chol.solve_in_place(&mut rhs);
        }
        for (i, slot) in layout.slots.iter().enumerate() {
            if let Slot::Free(k) = slot {
                v[i] = rhs[*k];
            }
        }

        // state update
        for (i, e) in elements.iter().enumerate() {
            match *e {
                Element::Inductor {
                    a,
                    b,
                    henries,
                    series_ohms,
                } => {
                    branch[i] = inductor_geq(rule, henries, series_ohms, dt)
                        * (v[a.index()] - v[b.index()])
                        + history[i];
                }
                Element::Capacitor { a, b, farads } => {
                    branch[i] = capacitor_geq(rule, farads, dt) * (v[a.index()] - v[b.index()])
                        + history[i];
                }
                _ => {}
            }
        }
        for (k, line) in lines.iter_mut().enumerate() {
            if let Element::TransmissionLine { near, far, z0, .. } = elements[line.element] {
                let (e_near, e_far) = line_sources[k];
                let i_near = (v[near.index()] - e_near) / z0;
                let i_far = (v[far.index()] - e_far) / z0;
                branch[line.element] = i_near;
                line_far_current[k] = i_far;
                let slot = n % line.w_near.len();
                line.w_near[slot] = v[near.index()] + z0 * i_near;
                line.w_far[slot] = v[far.index()] + z0 * i_far;
            }
        }

        if let Some(b) = rhs_copy {
            let (res, imax) = kcl_check(netlist, &layout, &assembled, &v, &b, &branch);
            stats.max_kcl_residual = stats.max_kcl_residual.max(res);
            stats.max_branch_current = stats.max_branch_current.max(imax);
        }

        if n % stride == 0 {
            record(&mut traces, &v, &branch);
        }
        t_prev = t;
        stats.steps += 1;
    }

    let mut out = WaveformSet::new(dt * stride as f64, config.settle_time, names, traces);
    out.stats = stats;
    Ok(out)
}

/// Conductances of everything except the drivers, which vary with time.
fn static_matrix(
    layout: &Layout,
    nodes: usize,
    elements: &[Element],
    rule: Rule,
    dt: f64,
) -> SystemMatrix {
    let mut m = SystemMatrix::zeros(layout.free, layout.bandwidth, layout.border);
    let v = alloc::vec![0.0; nodes];
    let mut scratch = alloc::vec![0.0; layout.free];
    let mut st = Stamper {
        layout,
        v: &v,
        matrix: Some(&mut m),
        rhs: &mut scratch,
    };
    for e in elements {
        match *e {
            Element::Resistor { a, b, ohms } => st.conductance(a, b, 1.0 / ohms),
            Element::Inductor {
                a,
                b,
                henries,
                series_ohms,
            } => st.conductance(a, b, inductor_geq(rule, henries, series_ohms, dt)),
            Element::Capacitor { a, b, farads } => {
                st.conductance(a, b, capacitor_geq(rule, farads, dt))
            }
            Element::TransmissionLine { near, far, z0, .. } => {
                st.conductance(near, NodeId::GROUND, 1.0 / z0);
                st.conductance(far, NodeId::GROUND, 1.0 / z0);
            }
            Element::Driver { .. } | Element::VoltageSource { .. } => {}
        }
    }
    m
}

fn inductor_geq(rule: Rule, henries: f64, series_ohms: f64, dt: f64) -> f64 {
    match rule {
        Rule::Trapezoidal => 1.0 / (series_ohms + 2.0 * henries / dt),
        Rule::BackwardEuler => 1.0 / (series_ohms + henries / dt),
    }
}

fn capacitor_geq(rule: Rule, farads: f64, dt: f64) -> f64 {
    match rule {
        Rule::Trapezoidal => 2.0 * farads / dt,
        Rule::BackwardEuler => farads / dt,
    }
}

/// Largest nodal residual `|b - A x|` and the largest element current.
fn kcl_check(
    netlist: &Netlist,
    layout: &Layout,
    a: &SystemMatrix,
    v: &[f64],
    b: &[f64],
    branch: &[f64],
) -> (f64, f64) {
    let mut x = alloc::vec![0.0; layout.free];
    for (i, slot) in layout.slots.iter().enumerate() {
        if let Slot::Free(k) = slot {
            x[*k] = v[i];
        }
    }
    let mut ax = alloc::vec![0.0; layout.free];
    a.mul_vec(&x, &mut ax);
    let res = ax
        .iter()
        .zip(b)
        .map(|(p, q)| libm::fabs(p - q))
        .fold(0.0, f64::max);
    let mut imax: f64 = 0.0;
    for (i, e) in netlist.elements().iter().enumerate() {
        let current = match *e {
            Element::Resistor { a, b, ohms } => (v[a.index()] - v[b.index()]) / ohms,
            Element::Inductor { .. }
            | Element::Capacitor { .. }
            | Element::TransmissionLine { .. } => branch[i],
            Element::Driver {
                input,
                vdd,
                vss,
                out,
                r_out,
                input_swing,
                overlap,
            } => {
                let s = drive_level(v, input, input_swing);
                let i_out =
                    (s * v[vdd.index()] + (1.0 - s) * v[vss.index()] - v[out.index()]) / r_out;
                let i_overlap = overlap * s * (1.0 - s) * (v[vdd.index()] - v[vss.index()]) / r_out;
                libm::fabs(i_out).max(libm::fabs(i_overlap))
            }
            Element::VoltageSource { .. } => 0.0,
        };
        imax = imax.max(libm::fabs(current));
    }
    (res, imax)
}
