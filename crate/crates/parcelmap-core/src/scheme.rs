//! The three-level land-use taxonomy shared by every pipeline stage.
//!
//! Level 0 splits land into built-up (BUR) and non-built-up (NBUR) regions;
//! level 1 holds eight broad uses and level 2 sixteen detailed ones. Class ids
//! are stable small integers assigned top to bottom, so class rasters and
//! label tables serialize deterministically.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable identifier of one land-use class.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ClassId(pub u16);

impl std::fmt::Display for ClassId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    L0,
    L1,
    L2,
}

impl Level {
    pub fn depth(self) -> u8 {
        match self {
            Level::L0 => 0,
            Level::L1 => 1,
            Level::L2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::L0 => "L0",
            Level::L1 => "L1",
            Level::L2 => "L2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandUseClass {
    pub id: ClassId,
    pub code: String,
    pub name: String,
    pub level: Level,
    pub parent_id: Option<ClassId>,
}

/// The full taxonomy with parent links and lookup indexes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SchemeDoc", into = "SchemeDoc")]
pub struct CategoryScheme {
    classes: Vec<LandUseClass>,
    by_id: HashMap<ClassId, usize>,
}

/// Serialized form: a flat class list.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemeDoc {
    classes: Vec<LandUseClass>,
}

impl TryFrom<SchemeDoc> for CategoryScheme {
    type Error = Error;
    fn try_from(doc: SchemeDoc) -> Result<Self> {
        CategoryScheme::from_classes(doc.classes)
    }
}

impl From<CategoryScheme> for SchemeDoc {
    fn from(s: CategoryScheme) -> Self {
        SchemeDoc { classes: s.classes }
    }
}

pub const NBUR: ClassId = ClassId(0);
pub const BUR: ClassId = ClassId(1);

impl CategoryScheme {
    /// Build a scheme from a class list, checking the structural invariants:
    /// unique ids, codes unique within each level, exactly the {NBUR, BUR}
    /// pair at level 0, and a valid parent one level up for every L1/L2 class.
    pub fn from_classes(classes: Vec<LandUseClass>) -> Result<Self> {
        let mut by_id = HashMap::new();
        for (i, c) in classes.iter().enumerate() {
            if by_id.insert(c.id, i).is_some() {
                return Err(Error::InvalidScheme(format!("duplicate class id {}", c.id)));
            }
        }
        let mut seen_codes: HashMap<(Level, &str), ClassId> = HashMap::new();
        for c in &classes {
            if let Some(prev) = seen_codes.insert((c.level, c.code.as_str()), c.id) {
                return Err(Error::InvalidScheme(format!(
                    "code {:?} used by classes {} and {} at level {}",
                    c.code,
                    prev,
                    c.id,
                    c.level.name()
                )));
            }
        }
        let l0: Vec<&LandUseClass> = classes.iter().filter(|c| c.level == Level::L0).collect();
        if l0.len() != 2
            || !l0.iter().any(|c| c.code == "NBUR")
            || !l0.iter().any(|c| c.code == "BUR")
        {
            return Err(Error::InvalidScheme(
                "level 0 must be exactly {NBUR, BUR}".into(),
            ));
        }
        for c in &classes {
            match (c.level, c.parent_id) {
                (Level::L0, None) => {}
                (Level::L0, Some(_)) => {
                    return Err(Error::InvalidScheme(format!(
                        "level-0 class {} must not have a parent",
                        c.id
                    )))
                }
                (_, None) => {
                    return Err(Error::InvalidScheme(format!(
                        "class {} at level {} has no parent",
                        c.id,
                        c.level.name()
                    )))
                }
                (level, Some(pid)) => {
                    let parent = by_id
                        .get(&pid)
                        .map(|&i| &classes[i])
                        .ok_or_else(|| Error::InvalidScheme(format!("missing parent {pid}")))?;
                    if parent.level.depth() + 1 != level.depth() {
                        return Err(Error::InvalidScheme(format!(
                            "class {} at {} has parent {} at {}",
                            c.id,
                            level.name(),
                            pid,
                            parent.level.name()
                        )));
                    }
                }
            }
        }
        Ok(Self { classes, by_id })
    }

    pub fn class(&self, id: ClassId) -> Result<&LandUseClass> {
        self.by_id
            .get(&id)
            .map(|&i| &self.classes[i])
            .ok_or(Error::UnknownClass(id.0))
    }

    pub fn classes(&self) -> &[LandUseClass] {
        &self.classes
    }

    /// Classes at one level, in id order.
    pub fn classes_at(&self, level: Level) -> Vec<&LandUseClass> {
        let mut v: Vec<&LandUseClass> =
            self.classes.iter().filter(|c| c.level == level).collect();
        v.sort_by_key(|c| c.id);
        v
    }

    pub fn by_code(&self, level: Level, code: &str) -> Option<&LandUseClass> {
        self.classes
            .iter()
            .find(|c| c.level == level && c.code == code)
    }

    /// The unique ancestor of `id` at `level`; identity when levels match.
    pub fn ancestor_at(&self, id: ClassId, level: Level) -> Result<&LandUseClass> {
        let mut cur = self.class(id)?;
        if level.depth() > cur.level.depth() {
            return Err(Error::LevelBelowClass {
                class: id.0,
                actual: cur.level.name(),
                requested: level.name(),
            });
        }
        while cur.level.depth() > level.depth() {
            let pid = cur
                .parent_id
                .ok_or_else(|| Error::InvalidScheme(format!("class {} has no parent", cur.id)))?;
            cur = self.class(pid)?;
        }
        Ok(cur)
    }

    /// Whether the class sits in the built-up subtree.
    pub fn is_builtup(&self, id: ClassId) -> Result<bool> {
        Ok(self.ancestor_at(id, Level::L0)?.id == BUR)
    }

    /// Classes at `level` whose L0 ancestor is `root`, in id order.
    pub fn subtree_at(&self, root: ClassId, level: Level) -> Vec<&LandUseClass> {
        let mut v: Vec<&LandUseClass> = self
            .classes
            .iter()
            .filter(|c| {
                c.level == level
                    && self
                        .ancestor_at(c.id, Level::L0)
                        .map(|a| a.id == root)
                        .unwrap_or(false)
            })
            .collect();
        v.sort_by_key(|c| c.id);
        v
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Default for CategoryScheme {
    fn default() -> Self {
        default_scheme()
    }
}

/// The default scheme: NBUR over {Agriculture, Green Space, Waterbody,
/// Undeveloped} and BUR over {Residential, Commercial, Industrial, Public
/// Service}, with 16 detailed classes. Medical sits under Public Service,
/// which is the only placement giving the built-up side 4 level-1 and 9
/// level-2 categories.
pub fn default_scheme() -> CategoryScheme {
    fn c(id: u16, code: &str, name: &str, level: Level, parent: Option<u16>) -> LandUseClass {
        LandUseClass {
            id: ClassId(id),
            code: code.to_string(),
            name: name.to_string(),
            level,
            parent_id: parent.map(ClassId),
        }
    }
    let classes = vec![
        c(0, "NBUR", "Non-built-up region", Level::L0, None),
        c(1, "BUR", "Built-up region", Level::L0, None),
        c(2, "A", "Agriculture", Level::L1, Some(0)),
        c(3, "G", "Green Space", Level::L1, Some(0)),
        c(4, "W", "Waterbody", Level::L1, Some(0)),
        c(5, "U", "Undeveloped", Level::L1, Some(0)),
        c(6, "R", "Residential", Level::L1, Some(1)),
        c(7, "C", "Commercial", Level::L1, Some(1)),
        c(8, "I", "Industrial", Level::L1, Some(1)),
        c(9, "P", "Public Service", Level::L1, Some(1)),
        c(10, "Cro", "Cropland", Level::L2, Some(2)),
        c(11, "Orc", "Orchard", Level::L2, Some(2)),
        c(12, "Aqu", "Aquaculture", Level::L2, Some(2)),
        c(13, "For", "Forest", Level::L2, Some(3)),
        c(14, "Shr", "Shrubland", Level::L2, Some(3)),
        c(15, "W", "Waterbody", Level::L2, Some(4)),
        c(16, "U", "Undeveloped", Level::L2, Some(5)),
        c(17, "Vil", "Village", Level::L2, Some(6)),
        c(18, "Com", "Community", Level::L2, Some(6)),
        c(19, "Mar", "Marketing", Level::L2, Some(7)),
        c(20, "Ser", "Service building", Level::L2, Some(7)),
        c(21, "I", "Industrial", Level::L2, Some(8)),
        c(22, "Med", "Medical", Level::L2, Some(9)),
        c(23, "Edu", "Educational", Level::L2, Some(9)),
        c(24, "Gov", "Government", Level::L2, Some(9)),
        c(25, "Tra", "Transportation", Level::L2, Some(9)),
    ];
    CategoryScheme::from_classes(classes).expect("default scheme is valid")
}
