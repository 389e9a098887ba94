use std::fmt;

use crate::error::{Error, Result};

use super::MAX_WORD_LEN;

/// First-order operators acting on functions of `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    /// `D = p_a ∂^a` (or `𝒟 = P_a ∂^a` inside the generating function).
    Dmom,
    /// `D̄ = (∂_a V) ∂^a`.
    Dbar,
}

/// A product of operator atoms applied to `V`, rightmost atom first.
///
/// The special word `D̄₃ V = (∂_aV)(∂_bV)(∂_cV) ∂^a∂^b∂^c V` is not a product of
/// first-order atoms and is represented by a flag.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OperatorWord {
    atoms: Vec<Atom>,
    special_d3: bool,
}

impl OperatorWord {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.len() > MAX_WORD_LEN {
            return Err(Error::WordTooLong(atoms.len()));
        }
        Ok(OperatorWord {
            atoms,
            special_d3: false,
        })
    }

    /// The `D̄₃` atom applied directly to `V`.
    pub fn d3bar() -> Self {
        OperatorWord {
            atoms: Vec::new(),
            special_d3: true,
        }
    }

    /// Parses the compact notation used in the generator table: `D` for the
    /// momentum atom, `B` for `D̄`, written left to right as in `D̄D²` = `"BDD"`.
    /// `"D3"` is the special `D̄₃` word; the empty string is `V` itself.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "D3" {
            return Ok(Self::d3bar());
        }
        let atoms = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                'D' => Ok(Atom::Dmom),
                'B' => Ok(Atom::Dbar),
                other => Err(Error::InvalidInput(format!("unknown operator atom '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }

    /// Atoms in written order (leftmost applied last).
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_d3bar(&self) -> bool {
        self.special_d3
    }

    pub fn len(&self) -> usize {
        if self.special_d3 {
            1
        } else {
            self.atoms.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of momentum atoms; the word is homogeneous of this degree in
    /// the momentum argument.
    pub fn momentum_degree(&self) -> usize {
        self.atoms.iter().filter(|a| **a == Atom::Dmom).count()
    }
}

impl fmt::Display for OperatorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.special_d3 {
            return write!(f, "D̄₃V");
        }
        let mut i = 0;
        while i < self.atoms.len() {
            let atom = self.atoms[i];
            let run = self.atoms[i..].iter().take_while(|a| **a == atom).count();
            f.write_str(match atom {
                Atom::Dmom => "D",
                Atom::Dbar => "D̄",
            })?;
            if run > 1 {
                write!(f, "^{run}")?;
            }
            i += run;
        }
        write!(f, "V")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let w = OperatorWord::parse("DDBDD").unwrap();
        assert_eq!(w.len(), 5);
        assert_eq!(w.momentum_degree(), 4);
        assert_eq!(w.to_string(), "D^2D̄D^2V");
        assert_eq!(OperatorWord::parse("D3").unwrap().to_string(), "D̄₃V");
        assert!(OperatorWord::parse("DXD").is_err());
    }

    #[test]
    fn length_limit() {
        assert!(OperatorWord::parse("DDDDDDD").is_ok());
        assert_eq!(OperatorWord::parse("DDDDDDDD"), Err(Error::WordTooLong(8)));
    }
}
