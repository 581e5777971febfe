//! Forwarding information base with longest-prefix match.

use std::collections::BTreeMap;

use crate::name::Name;

use super::FaceId;

#[derive(Debug, Clone, Default)]
pub struct Fib {
    routes: BTreeMap<Name, Vec<FaceId>>,
}

impl Fib {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, prefix: Name, face: FaceId) {
        let hops = self.routes.entry(prefix).or_default();
        if !hops.contains(&face) {
            hops.push(face);
        }
    }

    pub fn routes(&self) -> impl Iterator<Item = (&Name, &[FaceId])> {
        self.routes.iter().map(|(n, f)| (n, f.as_slice()))
    }

    /// First next hop of the longest matching prefix, never `exclude`.
    /// Falls back to shorter prefixes when the longest one only points back
    /// at `exclude`.
    pub fn lookup(&self, name: &Name, exclude: FaceId) -> Option<FaceId> {
        (0..=name.len()).rev().find_map(|n| {
            self.routes
                .get(&name.prefix(n))
                .and_then(|hops| hops.iter().copied().find(|&f| f != exclude))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_prefix_wins() {
        let mut fib = Fib::new();
        fib.add(Name::new(), 1);
        fib.add(Name::parse("/a").unwrap(), 2);
        fib.add(Name::parse("/a/b").unwrap(), 3);
        assert_eq!(fib.lookup(&Name::parse("/a/b/c").unwrap(), 9), Some(3));
        assert_eq!(fib.lookup(&Name::parse("/a/x").unwrap(), 9), Some(2));
        assert_eq!(fib.lookup(&Name::parse("/z").unwrap(), 9), Some(1));
        assert_eq!(fib.lookup(&Name::parse("/a/b").unwrap(), 3), Some(2));
        assert_eq!(Fib::new().lookup(&Name::new(), 0), None);
    }
}
