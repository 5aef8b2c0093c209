use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::value::{EntityKind, EntityRef, Value};
use super::{SpaceError, TupleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Up,
    Down,
    Isolated,
}

/// Latest value of one metric, with the tuple it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub value: Value,
    pub tuple: TupleId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub status: Status,
    pub attrs: BTreeMap<String, Attribute>,
}

impl Default for EntityRecord {
    fn default() -> Self {
        Self {
            status: Status::Up,
            attrs: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub host: u32,
    pub priority: i64,
    pub uses_bsl_or_linda: bool,
    pub record: EntityRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub members: BTreeSet<u32>,
    pub record: EntityRecord,
}

/// Registry of stations, access points, tasks and task groups together with
/// their latest QoS attributes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntityModel {
    stations: BTreeMap<u32, EntityRecord>,
    access_points: BTreeMap<u32, EntityRecord>,
    tasks: BTreeMap<u32, TaskRecord>,
    groups: BTreeMap<u32, GroupRecord>,
}

impl EntityModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_station(&mut self, id: u32) {
        self.stations.entry(id).or_default();
    }

    pub fn add_access_point(&mut self, id: u32) {
        self.access_points.entry(id).or_default();
    }

    pub fn add_task(&mut self, id: u32, host: u32, priority: i64, uses_bsl_or_linda: bool) -> Result<(), SpaceError> {
        if !self.stations.contains_key(&host) {
            return Err(SpaceError::UnknownEntity(EntityRef::station(host)));
        }
        self.tasks.insert(
            id,
            TaskRecord {
                host,
                priority,
                uses_bsl_or_linda,
                record: EntityRecord::default(),
            },
        );
        Ok(())
    }

    pub fn add_group(&mut self, id: u32, members: BTreeSet<u32>) -> Result<(), SpaceError> {
        if let Some(missing) = members.iter().find(|t| !self.tasks.contains_key(t)) {
            return Err(SpaceError::UnknownEntity(EntityRef::task(*missing)));
        }
        self.groups.insert(
            id,
            GroupRecord {
                members,
                record: EntityRecord::default(),
            },
        );
        Ok(())
    }

    pub fn contains(&self, e: EntityRef) -> bool {
        self.record(e).is_some()
    }

    /// Ids of every entity of a class, ascending.
    pub fn ids(&self, kind: EntityKind) -> Vec<u32> {
        match kind {
            EntityKind::Station => self.stations.keys().copied().collect(),
            EntityKind::AccessPoint => self.access_points.keys().copied().collect(),
            EntityKind::Task => self.tasks.keys().copied().collect(),
            EntityKind::Group => self.groups.keys().copied().collect(),
        }
    }

    pub fn record(&self, e: EntityRef) -> Option<&EntityRecord> {
        match e.kind {
            EntityKind::Station => self.stations.get(&e.id),
            EntityKind::AccessPoint => self.access_points.get(&e.id),
            EntityKind::Task => self.tasks.get(&e.id).map(|t| &t.record),
            EntityKind::Group => self.groups.get(&e.id).map(|g| &g.record),
        }
    }

    pub fn record_mut(&mut self, e: EntityRef) -> Option<&mut EntityRecord> {
        match e.kind {
            EntityKind::Station => self.stations.get_mut(&e.id),
            EntityKind::AccessPoint => self.access_points.get_mut(&e.id),
            EntityKind::Task => self.tasks.get_mut(&e.id).map(|t| &mut t.record),
            EntityKind::Group => self.groups.get_mut(&e.id).map(|g| &mut g.record),
        }
    }

    pub fn task(&self, id: u32) -> Option<&TaskRecord> {
        self.tasks.get(&id)
    }

    pub fn task_mut(&mut self, id: u32) -> Option<&mut TaskRecord> {
        self.tasks.get_mut(&id)
    }

    pub fn group(&self, id: u32) -> Option<&GroupRecord> {
        self.groups.get(&id)
    }

    pub fn metric(&self, e: EntityRef, metric: &str) -> Option<&Value> {
        self.record(e)?.attrs.get(metric).map(|a| &a.value)
    }

    pub fn status(&self, e: EntityRef) -> Option<Status> {
        self.record(e).map(|r| r.status)
    }

    pub fn set_status(&mut self, e: EntityRef, status: Status) -> Result<(), SpaceError> {
        self.record_mut(e)
            .map(|r| r.status = status)
            .ok_or(SpaceError::UnknownEntity(e))
    }

    /// Records a metric value unless a newer tuple already supplied one.
    pub(crate) fn observe(&mut self, e: EntityRef, metric: &str, value: Value, tuple: TupleId) {
        if let Some(rec) = self.record_mut(e) {
            match rec.attrs.get(metric) {
                Some(a) if a.tuple > tuple => {}
                _ => {
                    rec.attrs.insert(metric.to_string(), Attribute { value, tuple });
                }
            }
        }
    }

    pub(crate) fn replace_attr(&mut self, e: EntityRef, metric: &str, attr: Option<Attribute>) {
        if let Some(rec) = self.record_mut(e) {
            match attr {
                Some(a) => {
                    rec.attrs.insert(metric.to_string(), a);
                }
                None => {
                    rec.attrs.remove(metric);
                }
            }
        }
    }

    pub(crate) fn attr_source(&self, e: EntityRef, metric: &str) -> Option<TupleId> {
        self.record(e)?.attrs.get(metric).map(|a| a.tuple)
    }
}
