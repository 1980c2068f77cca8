//! Subclass closure over "subclass of" edges and classification of entities
//! by their "instance of" targets.
//!
//! Ingestion is two passes over the dump: the first feeds every entity to a
//! [`ClassGraphBuilder`] (only P279 edges are retained), the second runs
//! [`classify`] against the finished, immutable [`ClassGraph`].

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::borrow::Borrow;
use core::fmt;

use crate::text::clean_label;
use crate::types::EntityId;

/// One entity document as read from a dump.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawEntity {
    pub id: EntityId,
    pub labels: BTreeMap<String, String>,
    pub aliases: BTreeMap<String, Vec<String>>,
    /// "instance of" targets.
    pub p31: Vec<EntityId>,
    /// "subclass of" targets.
    pub p279: Vec<EntityId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EntityClass {
    Person,
    Organisation,
    Place,
}

impl EntityClass {
    /// Priority order used when an entity belongs to several closures.
    pub const PRIORITY: [EntityClass; 3] =
        [EntityClass::Person, EntityClass::Organisation, EntityClass::Place];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityClass::Person => "Person",
            EntityClass::Organisation => "Organisation",
            EntityClass::Place => "Place",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The three root classes, indexed by [`EntityClass`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassRoots(pub [EntityId; 3]);

impl Default for ClassRoots {
    fn default() -> Self {
        // Person, Organisation, Geographic Location.
        ClassRoots([EntityId(215_627), EntityId(43_229), EntityId(2_221_906)])
    }
}

impl ClassRoots {
    pub fn root(&self, class: EntityClass) -> EntityId {
        self.0[class.index()]
    }
}

/// Accumulates P279 edges during the first dump pass.
#[derive(Debug, Default)]
pub struct ClassGraphBuilder {
    roots: ClassRoots,
    edges: BTreeMap<EntityId, Vec<EntityId>>,
}

impl ClassGraphBuilder {
    pub fn new(roots: ClassRoots) -> Self {
        ClassGraphBuilder {
            roots,
            edges: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, entity: &RawEntity) {
        if entity.p279.is_empty() {
            return;
        }
        let supers = self.edges.entry(entity.id).or_default();
        for &s in &entity.p279 {
            if !supers.contains(&s) {
                supers.push(s);
            }
        }
    }

    pub fn finish(self) -> ClassGraph {
        let mut reverse: BTreeMap<EntityId, Vec<EntityId>> = BTreeMap::new();
        for (&sub, supers) in &self.edges {
            for &sup in supers {
                reverse.entry(sup).or_default().push(sub);
            }
        }

        let closures = EntityClass::PRIORITY.map(|class| {
            let root = self.roots.root(class);
            let mut seen = BTreeSet::new();
            let mut queue = VecDeque::from([root]);
            while let Some(node) = queue.pop_front() {
                for &sub in reverse.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
                    if sub != root && seen.insert(sub) {
                        queue.push_back(sub);
                    }
                }
            }
            seen
        });

        let mut edges = self.edges;
        edges.retain(|id, _| closures.iter().any(|c| c.contains(id)));
        ClassGraph {
            roots: self.roots,
            edges,
            closures,
        }
    }
}

/// P279 adjacency restricted to subclasses of the roots, plus the closures.
#[derive(Debug, Clone)]
pub struct ClassGraph {
    roots: ClassRoots,
    edges: BTreeMap<EntityId, Vec<EntityId>>,
    closures: [BTreeSet<EntityId>; 3],
}

impl ClassGraph {
    pub fn roots(&self) -> &ClassRoots {
        &self.roots
    }

    /// Strict subclasses of a root (the root itself is not included).
    pub fn subclasses(&self, class: EntityClass) -> &BTreeSet<EntityId> {
        &self.closures[class.index()]
    }

    /// Superclass edges of every retained class.
    pub fn edges(&self) -> &BTreeMap<EntityId, Vec<EntityId>> {
        &self.edges
    }

    /// Whether `id` is the root of `class` or one of its subclasses.
    pub fn is_in(&self, class: EntityClass, id: EntityId) -> bool {
        self.roots.root(class) == id || self.closures[class.index()].contains(&id)
    }

    /// Highest-priority class any of `instance_of` falls in.
    pub fn class_of(&self, instance_of: &[EntityId]) -> Option<EntityClass> {
        EntityClass::PRIORITY
            .into_iter()
            .find(|&class| instance_of.iter().any(|&t| self.is_in(class, t)))
    }
}

pub fn build_class_graph<I>(entities: I, roots: ClassRoots) -> ClassGraph
where
    I: IntoIterator,
    I::Item: Borrow<RawEntity>,
{
    let mut builder = ClassGraphBuilder::new(roots);
    for e in entities {
        builder.add(e.borrow());
    }
    builder.finish()
}

/// An instance of one of the root closures with cleaned labels.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntityRecord {
    pub id: EntityId,
    pub entity_class: EntityClass,
    /// language -> main label
    pub labels: BTreeMap<String, String>,
    /// language -> aliases, never containing that language's main label
    #[cfg_attr(feature = "serde", serde(default))]
    pub aliases: BTreeMap<String, Vec<String>>,
}

impl EntityRecord {
    /// Languages with at least one label or alias.
    pub fn languages(&self) -> BTreeSet<&str> {
        self.labels
            .keys()
            .chain(self.aliases.keys())
            .map(String::as_str)
            .collect()
    }

    /// Main label first (when present), then aliases, each tagged `is_main`.
    pub fn labels_in(&self, lang: &str) -> Vec<(&str, bool)> {
        let mut out = Vec::new();
        if let Some(main) = self.labels.get(lang) {
            out.push((main.as_str(), true));
        }
        if let Some(aliases) = self.aliases.get(lang) {
            out.extend(aliases.iter().map(|a| (a.as_str(), false)));
        }
        out
    }

    /// NFC + trim every label, drop empties, deduplicate aliases and remove
    /// the main label from its language's alias list. Idempotent.
    pub fn normalize(&mut self) {
        let labels = core::mem::take(&mut self.labels);
        self.labels = labels
            .into_iter()
            .map(|(lang, l)| (lang, clean_label(&l)))
            .filter(|(_, l)| !l.is_empty())
            .collect();

        let aliases = core::mem::take(&mut self.aliases);
        for (lang, list) in aliases {
            let main = self.labels.get(&lang);
            let mut kept: Vec<String> = Vec::with_capacity(list.len());
            for a in list {
                let a = clean_label(&a);
                if a.is_empty() || Some(&a) == main || kept.contains(&a) {
                    continue;
                }
                kept.push(a);
            }
            if !kept.is_empty() {
                self.aliases.insert(lang, kept);
            }
        }
    }
}

/// Record for `entity` if one of its P31 targets lies in a root closure.
///
/// Classes that only have P279 edges into a root are not instances and are
/// never emitted.
pub fn classify(entity: &RawEntity, graph: &ClassGraph) -> Option<EntityRecord> {
    let entity_class = graph.class_of(&entity.p31)?;
    let mut record = EntityRecord {
        id: entity.id,
        entity_class,
        labels: entity.labels.clone(),
        aliases: entity.aliases.clone(),
    };
    record.normalize();
    Some(record)
}

pub fn classify_and_extract<'g, I>(
    entities: I,
    graph: &'g ClassGraph,
) -> impl Iterator<Item = EntityRecord> + 'g
where
    I: IntoIterator<Item = RawEntity>,
    I::IntoIter: 'g,
{
    entities.into_iter().filter_map(move |e| classify(&e, graph))
}
