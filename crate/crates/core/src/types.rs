use alloc::string::String;
use core::fmt;
use core::str::FromStr;

/// A Wikidata item identifier (`Q<digits>`), stored by its numeric part.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidEntityId(pub String);

impl fmt::Display for InvalidEntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid entity id {:?} (expected Q followed by digits)", self.0)
    }
}

impl core::error::Error for InvalidEntityId {}

impl FromStr for EntityId {
    type Err = InvalidEntityId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix('Q')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| InvalidEntityId(s.into()))?;
        digits
            .parse()
            .map(EntityId)
            .map_err(|_| InvalidEntityId(s.into()))
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.0)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for EntityId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for EntityId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One cross-lingual pairing of two labels of the same entity.
///
/// `lang_1 < lang_2` lexicographically; [`LabelPair::new`] swaps the sides
/// when they arrive in the other order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelPair {
    pub entity_id: EntityId,
    pub lang_1: String,
    pub lang_2: String,
    pub label_1: String,
    pub label_2: String,
    pub is_main_1: bool,
    pub is_main_2: bool,
}

impl LabelPair {
    /// Builds a pair in canonical language order. Returns `None` when both
    /// sides carry the same language.
    pub fn new(
        entity_id: EntityId,
        side_a: (&str, &str, bool),
        side_b: (&str, &str, bool),
    ) -> Option<Self> {
        let (a, b) = match side_a.0.cmp(side_b.0) {
            core::cmp::Ordering::Less => (side_a, side_b),
            core::cmp::Ordering::Greater => (side_b, side_a),
            core::cmp::Ordering::Equal => return None,
        };
        Some(LabelPair {
            entity_id,
            lang_1: a.0.into(),
            lang_2: b.0.into(),
            label_1: a.1.into(),
            label_2: b.1.into(),
            is_main_1: a.2,
            is_main_2: b.2,
        })
    }

    pub fn group_key(&self) -> GroupKey {
        GroupKey {
            entity_id: self.entity_id,
            lang_1: self.lang_1.clone(),
            lang_2: self.lang_2.clone(),
        }
    }

    /// The identity used to join predictions against ground truth.
    pub fn join_key(&self) -> (EntityId, &str, &str, &str, &str) {
        (
            self.entity_id,
            &self.lang_1,
            &self.lang_2,
            &self.label_1,
            &self.label_2,
        )
    }

    pub fn is_identical(&self) -> bool {
        self.label_1 == self.label_2
    }
}

/// `(entity, language 1, language 2)`: the unit the matcher operates on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub entity_id: EntityId,
    pub lang_1: String,
    pub lang_2: String,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}-{}", self.entity_id, self.lang_1, self.lang_2)
    }
}

/// The registered similarity scorers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScorerId {
    /// Cognate/transliteration overlap.
    Mpa,
    /// Sub-word alignment, mutual argmax.
    SimA,
    /// Sub-word alignment, maximum-weight matching.
    SimM,
    /// Sub-word alignment, iterated argmax.
    SimI,
    /// Mean cosine over all sub-word cells.
    SimC,
    /// LASER-family sentence embedding, cosine.
    LsC,
    /// LASER-family sentence embedding, inverse Euclidean.
    LsE,
    /// LaBSE-family sentence embedding, cosine.
    LbC,
    /// LaBSE-family sentence embedding, inverse Euclidean.
    LbE,
}

impl ScorerId {
    pub const ALL: [ScorerId; 9] = [
        ScorerId::Mpa,
        ScorerId::SimA,
        ScorerId::SimM,
        ScorerId::SimI,
        ScorerId::SimC,
        ScorerId::LsC,
        ScorerId::LsE,
        ScorerId::LbC,
        ScorerId::LbE,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScorerId::Mpa => "MPA",
            ScorerId::SimA => "SIM_A",
            ScorerId::SimM => "SIM_M",
            ScorerId::SimI => "SIM_I",
            ScorerId::SimC => "SIM_C",
            ScorerId::LsC => "LS_C",
            ScorerId::LsE => "LS_E",
            ScorerId::LbC => "LB_C",
            ScorerId::LbE => "LB_E",
        }
    }

    /// Closed range every score of this scorer must fall in.
    pub fn range(self) -> (f64, f64) {
        match self {
            ScorerId::Mpa | ScorerId::LsE | ScorerId::LbE => (0.0, 1.0),
            _ => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for ScorerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownMethod(pub String);

impl fmt::Display for UnknownMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown scorer or method id {:?}", self.0)
    }
}

impl core::error::Error for UnknownMethod {}

impl FromStr for ScorerId {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScorerId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| UnknownMethod(s.into()))
    }
}

/// Anything that produces a best-match set: a scorer followed by the greedy
/// matcher, or one of the two baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Scored(ScorerId),
    Randomized,
    MainLabel,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Scored(id) => id.as_str(),
            Method::Randomized => "RAN",
            Method::MainLabel => "ML",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "RAN" => Ok(Method::Randomized),
            "ML" => Ok(Method::MainLabel),
            other => other.parse().map(Method::Scored),
        }
    }
}

/// A label pair with one scorer's similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub pair: LabelPair,
    pub scorer: ScorerId,
    pub score: f64,
}
