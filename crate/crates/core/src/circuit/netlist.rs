use alloc::string::String;
use alloc::vec::Vec;

use super::CircuitError;

/// Index of a node in a [`Netlist`]. Node 0 is the global reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub const GROUND: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0
    }

    pub fn is_ground(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementId(pub(crate) usize);

impl ElementId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Time dependence of an ideal grounded voltage source.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceWave {
    Dc(f64),
    /// `from` before `at`, `to` afterwards (the DC point uses `from`).
    Step {
        from: f64,
        to: f64,
        at: f64,
    },
    /// `low + (high - low) * s(t)` where `s` is the normalized level of drive
    /// lane `lane` supplied to the transient run.
    Drive {
        lane: usize,
        low: f64,
        high: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Resistor {
        a: NodeId,
        b: NodeId,
        ohms: f64,
    },
    /// Inductor with an optional series resistance, as one branch from `a` to `b`.
    Inductor {
        a: NodeId,
        b: NodeId,
        henries: f64,
        series_ohms: f64,
    },
    Capacitor {
        a: NodeId,
        b: NodeId,
        farads: f64,
    },
    /// Ideal voltage source from the reference to `node`.
    VoltageSource {
        node: NodeId,
        wave: SourceWave,
    },
    /// Push-pull source-series-terminated driver.
    ///
    /// The input node must be held by a voltage source; its voltage divided
    /// by `input_swing` and clipped to `[0, 1]` is the drive level `s`. The
    /// output is a Thevenin source `s * v(vdd) + (1 - s) * v(vss)` behind
    /// `r_out`, whose current `i` is drawn as `s * i` from `vdd` and
    /// `(1 - s) * i` from `vss`. Pull-up/pull-down overlap adds a conductance
    /// `overlap * s * (1 - s) / r_out` between `vdd` and `vss`.
    Driver {
        input: NodeId,
        vdd: NodeId,
        vss: NodeId,
        out: NodeId,
        r_out: f64,
        input_swing: f64,
        overlap: f64,
    },
    /// Lossless line between `near` and `far`, both referenced to ground.
    TransmissionLine {
        near: NodeId,
        far: NodeId,
        z0: f64,
        delay: f64,
    },
}

impl Element {
    pub fn terminals(&self) -> Vec<NodeId> {
        match *self {
            Element::Resistor { a, b, .. }
            | Element::Inductor { a, b, .. }
            | Element::Capacitor { a, b, .. } => alloc::vec![a, b],
            Element::VoltageSource { node, .. } => alloc::vec![node],
            Element::Driver {
                input,
                vdd,
                vss,
                out,
                ..
            } => alloc::vec![input, vdd, vss, out],
            Element::TransmissionLine { near, far, .. } => alloc::vec![near, far],
        }
    }

    fn check_values(&self) -> Result<(), String> {
        let positive = |what: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(alloc::format!(
                    "{what} must be positive and finite, got {v}"
                ))
            }
        };
        match *self {
            Element::Resistor { ohms, .. } => positive("resistance", ohms),
            Element::Inductor {
                henries,
                series_ohms,
                ..
            } => {
                positive("inductance", henries)?;
                if series_ohms.is_finite() && series_ohms >= 0.0 {
                    Ok(())
                } else {
                    Err(alloc::format!(
                        "series resistance must be non-negative, got {series_ohms}"
                    ))
                }
            }
            Element::Capacitor { farads, .. } => positive("capacitance", farads),
            Element::VoltageSource { .. } => Ok(()),
            Element::Driver {
                r_out,
                input_swing,
                overlap,
                ..
            } => {
                positive("driver output resistance", r_out)?;
                positive("driver input swing", input_swing)?;
                if (0.0..=1.0).contains(&overlap) {
                    Ok(())
                } else {
                    Err(alloc::format!(
                        "driver overlap must lie in [0, 1], got {overlap}"
                    ))
                }
            }
            Element::TransmissionLine { z0, delay, .. } => {
                positive("characteristic impedance", z0)?;
                positive("line delay", delay)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeKind {
    Voltage(NodeId),
    /// Sum of the branch currents (`a` to `b`) of the listed inductors.
    BranchCurrent(Vec<ElementId>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub kind: ProbeKind,
}

/// Node and element graph of a circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    node_names: Vec<String>,
    elements: Vec<Element>,
    probes: Vec<Probe>,
}

impl Default for Netlist {
    fn default() -> Self {
        Self::new()
    }
}

impl Netlist {
    pub fn new() -> Self {
        Netlist {
            node_names: alloc::vec![String::from("0")],
            elements: Vec::new(),
            probes: Vec::new(),
        }
    }

    pub fn add_node(&mut self, name: impl Into<String>) -> NodeId {
        self.node_names.push(name.into());
        NodeId(self.node_names.len() - 1)
    }

    pub fn add(&mut self, element: Element) -> ElementId {
        self.elements.push(element);
        ElementId(self.elements.len() - 1)
    }

    pub fn resistor(&mut self, a: NodeId, b: NodeId, ohms: f64) -> ElementId {
        self.add(Element::Resistor { a, b, ohms })
    }

    pub fn inductor(&mut self, a: NodeId, b: NodeId, henries: f64, series_ohms: f64) -> ElementId {
        self.add(Element::Inductor {
            a,
            b,
            henries,
            series_ohms,
        })
    }

    pub fn capacitor(&mut self, a: NodeId, b: NodeId, farads: f64) -> ElementId {
        self.add(Element::Capacitor { a, b, farads })
    }

    pub fn source(&mut self, node: NodeId, wave: SourceWave) -> ElementId {
        self.add(Element::VoltageSource { node, wave })
    }

    pub fn probe_voltage(&mut self, name: impl Into<String>, node: NodeId) {
        self.probes.push(Probe {
            name: name.into(),
            kind: ProbeKind::Voltage(node),
        });
    }

    pub fn probe_current(&mut self, name: impl Into<String>, branches: Vec<ElementId>) {
        self.probes.push(Probe {
            name: name.into(),
            kind: ProbeKind::BranchCurrent(branches),
        });
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn node_name(&self, node: NodeId) -> &str {
        &self.node_names[node.0]
    }

    pub fn find_node(&self, name: &str) -> Option<NodeId> {
        self.node_names.iter().position(|n| n == name).map(NodeId)
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, id: ElementId) -> &Element {
        &self.elements[id.0]
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    /// Largest drive lane index referenced by a source, plus one.
    pub fn drive_lanes(&self) -> usize {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::VoltageSource {
                    wave: SourceWave::Drive { lane, .. },
                    ..
                } => Some(lane + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Checks structural invariants: terminals and probes reference existing
    /// nodes, element values are physical, at most one source per node, no
    /// source on the reference, driver inputs are source-held and every
    /// current probe names an inductor.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let n = self.node_names.len();
        let mut held = alloc::vec![false; n];
        for (i, e) in self.elements.iter().enumerate() {
            for t in e.terminals() {
                if t.0 >= n {
                    return Err(CircuitError::InvalidNetlist(alloc::format!(
                        "element {i} references missing node {}",
                        t.0
                    )));
                }
            }
            e.check_values()
                .map_err(|m| CircuitError::InvalidNetlist(alloc::format!("element {i}: {m}")))?;
            if let Element::VoltageSource { node, .. } = e {
                if node.is_ground() {
                    return Err(CircuitError::InvalidNetlist(alloc::format!(
                        "element {i}: source on the reference node"
                    )));
                }
                if held[node.0] {
                    return Err(CircuitError::InvalidNetlist(alloc::format!(
                        "node {} has more than one voltage source",
                        self.node_names[node.0]
                    )));
                }
                held[node.0] = true;
            }
        }
        for (i, e) in self.elements.iter().enumerate() {
            if let Element::Driver { input, .. } = e {
                if !held[input.0] {
                    return Err(CircuitError::InvalidNetlist(alloc::format!(
                        "driver {i}: input node {} is not held by a source",
                        self.node_names[input.0]
                    )));
                }
            }
        }
        for p in &self.probes {
            match &p.kind {
                ProbeKind::Voltage(node) if node.0 >= n => {
                    return Err(CircuitError::InvalidNetlist(alloc::format!(
                        "probe {} references missing node",
                        p.name
                    )))
                }
                ProbeKind::BranchCurrent(ids) => {
                    for id in ids {
                        if !matches!(self.elements.get(id.0), Some(Element::Inductor { .. })) {
                            return Err(CircuitError::InvalidNetlist(alloc::format!(
                                "probe {} must reference inductors",
                                p.name
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Node and element counts by kind.
    pub fn census(&self) -> Census {
        let mut c = Census {
            nodes: self.node_names.len(),
            probes: self.probes.len(),
            ..Census::default()
        };
        for e in &self.elements {
            match e {
                Element::Resistor { .. } => c.resistors += 1,
                Element::Inductor { .. } => c.inductors += 1,
                Element::Capacitor { .. } => c.capacitors += 1,
                Element::VoltageSource { .. } => c.sources += 1,
                Element::Driver { .. } => c.drivers += 1,
                Element::TransmissionLine { .. } => c.lines += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Census {
    pub nodes: usize,
    pub resistors: usize,
    pub inductors: usize,
    pub capacitors: usize,
    pub sources: usize,
    pub drivers: usize,
    pub lines: usize,
    pub probes: usize,
}
