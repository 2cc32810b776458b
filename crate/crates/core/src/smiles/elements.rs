//! Element table: symbols, standard atomic weights and default valences.

use std::fmt;

/// Static data for one supported element.
#[derive(Debug)]
pub struct ElementInfo {
    pub symbol: &'static str,
    pub number: u8,
    pub weight: f64,
    /// Allowed neutral valences, ascending. Empty means unrestricted.
    pub valences: &'static [u8],
    /// Periodic group, used to shift valences for charged atoms.
    pub group: u8,
}

macro_rules! el {
    ($sym:expr, $num:expr, $w:expr, $val:expr, $g:expr) => {
        ElementInfo { symbol: $sym, number: $num, weight: $w, valences: $val, group: $g }
    };
}

static TABLE: &[ElementInfo] = &[
    el!("H", 1, 1.008, &[1], 1),
    el!("Li", 3, 6.94, &[], 1),
    el!("B", 5, 10.81, &[3], 13),
    el!("C", 6, 12.011, &[4], 14),
    el!("N", 7, 14.007, &[3, 5], 15),
    el!("O", 8, 15.999, &[2], 16),
    el!("F", 9, 18.998, &[1], 17),
    el!("Na", 11, 22.990, &[], 1),
    el!("Mg", 12, 24.305, &[], 2),
    el!("Al", 13, 26.982, &[], 13),
    el!("Si", 14, 28.085, &[4], 14),
    el!("P", 15, 30.974, &[3, 5], 15),
    el!("S", 16, 32.06, &[2, 4, 6], 16),
    el!("Cl", 17, 35.45, &[1], 17),
    el!("K", 19, 39.098, &[], 1),
    el!("Ca", 20, 40.078, &[], 2),
    el!("Fe", 26, 55.845, &[], 8),
    el!("Cu", 29, 63.546, &[], 11),
    el!("Zn", 30, 65.38, &[], 12),
    el!("As", 33, 74.922, &[3, 5], 15),
    el!("Se", 34, 78.971, &[2, 4, 6], 16),
    el!("Br", 35, 79.904, &[1], 17),
    el!("Sn", 50, 118.71, &[], 14),
    el!("I", 53, 126.90, &[1], 17),
];

/// An element, identified by atomic number. Number 0 is the `*` wildcard atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

impl Element {
    pub const WILDCARD: Element = Element(0);
    pub const H: Element = Element(1);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        if symbol == "*" {
            return Some(Element::WILDCARD);
        }
        TABLE.iter().find(|e| e.symbol == symbol).map(|e| Element(e.number))
    }

    pub fn from_number(number: u8) -> Option<Element> {
        if number == 0 {
            return Some(Element::WILDCARD);
        }
        TABLE.iter().find(|e| e.number == number).map(|e| Element(e.number))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn info(self) -> Option<&'static ElementInfo> {
        TABLE.iter().find(|e| e.number == self.0)
    }

    pub fn symbol(self) -> &'static str {
        self.info().map_or("*", |e| e.symbol)
    }

    pub fn is_wildcard(self) -> bool {
        self.0 == 0
    }

    /// Valences allowed for this element carrying `charge`. `None` means unrestricted.
    pub fn allowed_valences(self, charge: i8) -> Option<Vec<u8>> {
        let info = self.info()?;
        if info.valences.is_empty() {
            return None;
        }
        let q = charge as i32;
        let shifted = info
            .valences
            .iter()
            .map(|&v| {
                let v = v as i32;
                match info.group {
                    13 => v - q,
                    14 => v - q.abs(),
                    15..=17 => v + q,
                    _ => v,
                }
            })
            .filter(|&v| v >= 0)
            .map(|v| v as u8)
            .collect();
        Some(shifted)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Organic-subset elements that may appear outside brackets.
pub fn organic_subset(symbol: &str) -> Option<Element> {
    match symbol {
        "B" | "C" | "N" | "O" | "P" | "S" | "F" | "Cl" | "Br" | "I" => Element::from_symbol(symbol),
        _ => None,
    }
}

/// Lowercase aromatic symbols and the element they denote.
pub fn aromatic_symbol(symbol: &str) -> Option<Element> {
    match symbol {
        "b" => Some(Element(5)),
        "c" => Some(Element::C),
        "n" => Some(Element::N),
        "o" => Some(Element::O),
        "p" => Some(Element(15)),
        "s" => Some(Element(16)),
        "se" => Some(Element(34)),
        "as" => Some(Element(33)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charged_valences_follow_group() {
        let n = Element::N;
        assert_eq!(n.allowed_valences(1), Some(vec![4, 6]));
        assert_eq!(Element::O.allowed_valences(-1), Some(vec![1]));
        assert_eq!(Element::C.allowed_valences(-1), Some(vec![3]));
        assert_eq!(Element::from_symbol("B").unwrap().allowed_valences(-1), Some(vec![4]));
        assert_eq!(Element::from_symbol("Na").unwrap().allowed_valences(1), None);
    }

    #[test]
    fn symbols_round_trip() {
        for sym in ["H", "C", "Cl", "Br", "Se", "*"] {
            assert_eq!(Element::from_symbol(sym).unwrap().symbol(), sym);
        }
        assert!(Element::from_symbol("Xx").is_none());
    }
}
