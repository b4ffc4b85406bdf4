use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use url::Url;

use super::lemma::normalize_action;
use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
const PAD_KEY: &str = "<pad>";
const UNK_KEY: &str = "<unk>";

macro_rules! id_newtype {
    ($name:ident) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub const PAD: Self = Self(PAD);
            pub const UNK: Self = Self(UNK);

            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_newtype!(EntityId);
id_newtype!(ActionId);

/// Dense row index into the stock embedding table. Row 0 is reserved for
/// stocks never seen in training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StockIndex(pub u32);

impl StockIndex {
    pub const UNK: Self = Self(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Indexed (subject, action, object) triplet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalEvent {
    pub subject: EntityId,
    pub action: ActionId,
    pub object: EntityId,
}

impl CanonicalEvent {
    pub const PAD: Self = Self {
        subject: EntityId::PAD,
        action: ActionId::PAD,
        object: EntityId::PAD,
    };
}

/// Dense id ↔ key bijection with per-id frequency counts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyTable {
    keys: Vec<String>,
    counts: Vec<u64>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl KeyTable {
    /// Table holding only the PAD and UNK reserved keys, each with count 1.
    pub fn with_reserved() -> Self {
        let mut t = Self::default();
        t.insert(PAD_KEY);
        t.insert(UNK_KEY);
        t
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Returns the id for `key`, creating it with count 1 or bumping its count.
    pub fn insert(&mut self, key: &str) -> u32 {
        if let Some(&id) = self.index.get(key) {
            self.counts[id as usize] += 1;
            return id;
        }
        let id = self.keys.len() as u32;
        self.keys.push(key.to_string());
        self.counts.push(1);
        self.index.insert(key.to_string(), id);
        id
    }

    pub fn get(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }

    pub fn key(&self, id: u32) -> Option<&str> {
        self.keys.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i as u32))
            .collect();
    }
}

/// Entity, action and stock universes for one training window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub entities: KeyTable,
    pub actions: KeyTable,
    /// Raw stock identifiers in row order; row 0 is the UNK stock.
    stocks: Vec<i64>,
    #[serde(skip)]
    stock_index: HashMap<i64, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

/// Outcome of resolving an entity surface form.
#[derive(Clone, Debug, PartialEq)]
pub struct EntityKey {
    pub key: String,
    /// Set when a link was supplied but rejected.
    pub warning: Option<String>,
}

/// Canonical key for an entity: the percent-decoded final path segment of its
/// link when the link parses, otherwise the lowercased, whitespace-collapsed
/// surface form.
pub fn entity_key(surface: &str, link: Option<&str>) -> EntityKey {
    let fallback = || surface.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let Some(link) = link.map(str::trim).filter(|l| !l.is_empty()) else {
        return EntityKey { key: fallback(), warning: None };
    };
    match link_segment(link) {
        Ok(seg) => EntityKey { key: seg, warning: None },
        Err(why) => EntityKey {
            key: fallback(),
            warning: Some(format!("rejected link {link:?}: {why}")),
        },
    }
}

fn link_segment(link: &str) -> std::result::Result<String, String> {
    let url = Url::parse(link).map_err(|e| e.to_string())?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(format!("unsupported scheme {}", url.scheme()));
    }
    let seg = url
        .path_segments()
        .and_then(|mut s| s.next_back().map(str::to_string))
        .filter(|s| !s.is_empty())
        .ok_or_else(|| "no path segment".to_string())?;
    Ok(percent_decode(&seg))
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let Ok(b) = u8::from_str_radix(&s[i + 1..i + 3], 16) {
                out.push(b);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

pub fn is_valid_link(link: &str) -> bool {
    link_segment(link).is_ok()
}

impl Vocabulary {
    pub fn new() -> Self {
        Self {
            entities: KeyTable::with_reserved(),
            actions: KeyTable::with_reserved(),
            stocks: vec![i64::MIN],
            stock_index: HashMap::new(),
        }
    }

    /// Maps an entity mention to its id, inserting new keys. A rejected link is
    /// reported through `warnings` and the surface form is used instead.
    pub fn canonicalize_entity(&mut self, surface: &str, link: Option<&str>, warnings: &mut Vec<String>) -> Result<EntityId> {
        if surface.trim().is_empty() {
            return Err(Error::Invalid("entity surface form is empty".into()));
        }
        let k = entity_key(surface, link);
        if let Some(w) = k.warning {
            warnings.push(w);
        }
        Ok(EntityId(self.entities.insert(&k.key)))
    }

    pub fn canonicalize_action(&mut self, raw: &str) -> Result<ActionId> {
        if raw.trim().is_empty() {
            return Err(Error::Invalid("action is empty".into()));
        }
        let key = normalize_action(raw);
        let key = if key.is_empty() { raw.trim().to_lowercase() } else { key };
        Ok(ActionId(self.actions.insert(&key)))
    }

    /// Read-only lookup used for test-window data: unseen keys map to UNK.
    pub fn lookup_entity(&self, surface: &str, link: Option<&str>) -> EntityId {
        let k = entity_key(surface, link);
        EntityId(self.entities.get(&k.key).unwrap_or(UNK))
    }

    pub fn lookup_action(&self, raw: &str) -> ActionId {
        ActionId(self.actions.get(&normalize_action(raw)).unwrap_or(UNK))
    }

    pub fn add_stock(&mut self, stock_id: i64) -> StockIndex {
        if let Some(&i) = self.stock_index.get(&stock_id) {
            return StockIndex(i);
        }
        let i = self.stocks.len() as u32;
        self.stocks.push(stock_id);
        self.stock_index.insert(stock_id, i);
        StockIndex(i)
    }

    pub fn lookup_stock(&self, stock_id: i64) -> StockIndex {
        self.stock_index.get(&stock_id).map_or(StockIndex::UNK, |&i| StockIndex(i))
    }

    /// Raw identifier for a stock row (`None` for the UNK row).
    pub fn stock_id(&self, idx: StockIndex) -> Option<i64> {
        (idx.0 != 0).then(|| self.stocks.get(idx.index()).copied()).flatten()
    }

    pub fn n_stocks(&self) -> usize {
        self.stocks.len()
    }

    pub fn describe(&self, ev: &CanonicalEvent) -> String {
        format!(
            "{}-{}-{}",
            self.entities.key(ev.subject.0).unwrap_or("?"),
            self.actions.key(ev.action.0).unwrap_or("?"),
            self.entities.key(ev.object.0).unwrap_or("?"),
        )
    }

    /// Restores lookup indices after deserialization.
    pub fn reindex(&mut self) {
        self.entities.reindex();
        self.actions.reindex();
        self.stock_index = self
            .stocks
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &s)| (s, i as u32))
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn link_segment_is_the_key() {
        let mut v = Vocabulary::new();
        let mut w = Vec::new();
        let a = v.canonicalize_entity("President Trump", Some("http://dbpedia.org/resource/Donald_Trump"), &mut w).unwrap();
        assert_eq!(v.entities.key(a.0), Some("Donald_Trump"));
        let b = v.canonicalize_entity("President Trump", Some("http://dbpedia.org/resource/Donald_Trump"), &mut w).unwrap();
        let c = v.canonicalize_entity("Donald Trump", Some("http://dbpedia.org/resource/Donald_Trump"), &mut w).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(v.entities.count(a.0), 3);
        assert!(w.is_empty());
    }

    #[test]
    fn percent_decoding_and_fallback() {
        assert_eq!(entity_key("x", Some("http://dbpedia.org/resource/Proctor_%26_Gamble")).key, "Proctor_&_Gamble");
        let k = entity_key("  Apple   Inc ", Some("not a url"));
        assert_eq!(k.key, "apple inc");
        assert!(k.warning.is_some());
        assert_eq!(entity_key("Apple Inc", None).key, "apple inc");
        assert!(entity_key("a", Some("ftp://x.org/y")).warning.is_some());
    }

    #[test]
    fn reserved_ids_and_unknowns() {
        let mut v = Vocabulary::new();
        assert_eq!(v.entities.key(PAD), Some("<pad>"));
        assert_eq!(v.actions.key(UNK), Some("<unk>"));
        assert_eq!(v.lookup_entity("Nobody", None), EntityId::UNK);
        assert_eq!(v.lookup_action("vanished"), ActionId::UNK);
        assert_eq!(v.lookup_stock(10001), StockIndex::UNK);
        let s = v.add_stock(10001);
        assert_eq!(s, StockIndex(1));
        assert_eq!(v.add_stock(10001), s);
        assert_eq!(v.stock_id(s), Some(10001));
        assert_eq!(v.stock_id(StockIndex::UNK), None);
        let a = v.canonicalize_action("Signed").unwrap();
        assert_eq!(v.lookup_action("signs"), a);
        assert!(v.canonicalize_entity("  ", None, &mut Vec::new()).is_err());
    }

    #[test]
    fn serde_roundtrip_reindexes() {
        let mut v = Vocabulary::new();
        v.canonicalize_entity("Google", None, &mut Vec::new()).unwrap();
        v.add_stock(7);
        let mut back: Vocabulary = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        back.reindex();
        assert_eq!(back.lookup_entity("google", None), EntityId(2));
        assert_eq!(back.lookup_stock(7), StockIndex(1));
    }

    proptest! {
        #[test]
        fn key_is_idempotent_and_table_stays_bijective(words in proptest::collection::vec("[A-Za-z ]{1,12}", 1..40)) {
            let mut v = Vocabulary::new();
            for w in &words {
                if w.trim().is_empty() { continue; }
                let id = v.canonicalize_entity(w, None, &mut Vec::new()).unwrap();
                let key = v.entities.key(id.0).unwrap().to_string();
                prop_assert_eq!(entity_key(&key, None).key, key.clone());
                prop_assert_eq!(v.entities.get(&key), Some(id.0));
            }
            let keys = v.entities.keys();
            let distinct: std::collections::HashSet<_> = keys.iter().collect();
            prop_assert_eq!(distinct.len(), keys.len());
            for id in 0..keys.len() as u32 {
                prop_assert!(v.entities.count(id) >= 1);
                prop_assert_eq!(v.entities.get(v.entities.key(id).unwrap()), Some(id));
            }
        }
    }
}
