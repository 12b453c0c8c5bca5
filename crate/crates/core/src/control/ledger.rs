use std::collections::BTreeMap;

use thiserror::Error;

use super::{FibreId, Path, Request};
use crate::arch::NodeId;

/// A running request and what it holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Active {
    pub request: Request,
    pub cid: u16,
    pub fibres: Vec<FibreId>,
    pub units: Vec<(NodeId, usize)>,
    pub start_time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerViolation {
    #[error("fibre {fibre} held by cid {holder} but not listed by it")]
    StrayFibre { fibre: FibreId, holder: u16 },
    #[error("fibre {fibre} listed by cid {cid} but held by {holder:?}")]
    FibreMismatch {
        fibre: FibreId,
        cid: u16,
        holder: Option<u16>,
    },
    #[error("unit {unit} at hub {hub} held by cid {holder} but not listed by it")]
    StrayUnit {
        hub: NodeId,
        unit: usize,
        holder: u16,
    },
    #[error("unit {unit} at hub {hub} listed by cid {cid} but held by {holder:?}")]
    UnitMismatch {
        hub: NodeId,
        unit: usize,
        cid: u16,
        holder: Option<u16>,
    },
    #[error("request {0} active under two connection ids")]
    DuplicateRequest(u32),
}

/// Occupancy of fibres and hub BSM units. Each resource records the CID
/// that holds it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceLedger {
    fibres: Vec<Option<u16>>,
    units: BTreeMap<NodeId, Vec<Option<u16>>>,
    active: BTreeMap<u16, Active>,
}

impl ResourceLedger {
    pub fn new(fibres: usize, units: &BTreeMap<NodeId, usize>) -> Self {
        ResourceLedger {
            fibres: vec![None; fibres],
            units: units.iter().map(|(&h, &n)| (h, vec![None; n])).collect(),
            active: BTreeMap::new(),
        }
    }

    pub fn fibre_holder(&self, f: FibreId) -> Option<u16> {
        self.fibres.get(f).copied().flatten()
    }

    pub fn free_units(&self, hub: NodeId) -> usize {
        self.units
            .get(&hub)
            .map_or(0, |u| u.iter().filter(|x| x.is_none()).count())
    }

    pub fn active(&self) -> impl Iterator<Item = &Active> {
        self.active.values()
    }

    pub fn get(&self, cid: u16) -> Option<&Active> {
        self.active.get(&cid)
    }

    pub fn has_cid(&self, cid: u16) -> bool {
        self.active.contains_key(&cid)
    }

    /// True iff every fibre on the path is free and every hub on it has a
    /// free unit.
    pub fn can_take(&self, path: &Path) -> bool {
        path.fibres
            .iter()
            .all(|&f| self.fibres.get(f) == Some(&None))
            && path.hubs().all(|h| self.free_units(h) > 0)
    }

    /// Assigns the path's resources to `cid`, taking the lowest free unit
    /// at each hub. Returns the units taken. Panics if `can_take` is false.
    pub fn take(
        &mut self,
        request: Request,
        cid: u16,
        path: &Path,
        now: u64,
    ) -> Vec<(NodeId, usize)> {
        assert!(
            self.can_take(path) && !self.has_cid(cid),
            "resources not available"
        );
        for &f in &path.fibres {
            self.fibres[f] = Some(cid);
        }
        let mut units = Vec::new();
        for hub in path.hubs() {
            let slots = self.units.get_mut(&hub).expect("hub known");
            let u = slots
                .iter()
                .position(Option::is_none)
                .expect("checked free");
            slots[u] = Some(cid);
            units.push((hub, u));
        }
        self.active.insert(
            cid,
            Active {
                request,
                cid,
                fibres: path.fibres.clone(),
                units: units.clone(),
                start_time: now,
            },
        );
        units
    }

    /// Releases everything `cid` holds.
    pub fn free(&mut self, cid: u16) -> Option<Active> {
        let a = self.active.remove(&cid)?;
        for &f in &a.fibres {
            self.fibres[f] = None;
        }
        for &(hub, u) in &a.units {
            self.units.get_mut(&hub).expect("hub known")[u] = None;
        }
        Some(a)
    }

    /// Cross-checks resource slots against the active table.
    pub fn check(&self) -> Result<(), LedgerViolation> {
        for (fibre, holder) in self.fibres.iter().enumerate() {
            if let Some(h) = *holder {
                if !self
                    .active
                    .get(&h)
                    .is_some_and(|a| a.fibres.contains(&fibre))
                {
                    return Err(LedgerViolation::StrayFibre { fibre, holder: h });
                }
            }
        }
        for (&hub, slots) in &self.units {
            for (unit, holder) in slots.iter().enumerate() {
                if let Some(h) = *holder {
                    if !self
                        .active
                        .get(&h)
                        .is_some_and(|a| a.units.contains(&(hub, unit)))
                    {
                        return Err(LedgerViolation::StrayUnit {
                            hub,
                            unit,
                            holder: h,
                        });
                    }
                }
            }
        }
        let mut reqs = BTreeMap::new();
        for a in self.active.values() {
            if reqs.insert(a.request.id, a.cid).is_some() {
                return Err(LedgerViolation::DuplicateRequest(a.request.id));
            }
            for &fibre in &a.fibres {
                let holder = self.fibre_holder(fibre);
                if holder != Some(a.cid) {
                    return Err(LedgerViolation::FibreMismatch {
                        fibre,
                        cid: a.cid,
                        holder,
                    });
                }
            }
            for &(hub, unit) in &a.units {
                let holder = self
                    .units
                    .get(&hub)
                    .and_then(|s| s.get(unit).copied().flatten());
                if holder != Some(a.cid) {
                    return Err(LedgerViolation::UnitMismatch {
                        hub,
                        unit,
                        cid: a.cid,
                        holder,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
impl ResourceLedger {
    pub(crate) fn active_mut_for_test(&mut self) -> &mut BTreeMap<u16, Active> {
        &mut self.active
    }
}
