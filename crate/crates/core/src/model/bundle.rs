use std::collections::BTreeSet;

use super::equation::{Equation, Orientation};
use super::term::{FunctionSymbol, Sort, Term};

/// Fixed tables of function symbols and equations a protocol can switch on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bundle {
    SymmetricEncryption,
    AsymmetricEncryption,
    Signing,
    Hashing,
    DiffieHellman,
    Pairing,
}

pub type BundleSet = BTreeSet<Bundle>;

impl Bundle {
    pub const ALL: [Bundle; 6] = [
        Bundle::SymmetricEncryption,
        Bundle::AsymmetricEncryption,
        Bundle::Signing,
        Bundle::Hashing,
        Bundle::DiffieHellman,
        Bundle::Pairing,
    ];

    pub fn xml_name(self) -> &'static str {
        match self {
            Bundle::SymmetricEncryption => "symmetric-encryption",
            Bundle::AsymmetricEncryption => "asymmetric-encryption",
            Bundle::Signing => "signing",
            Bundle::Hashing => "hashing",
            Bundle::DiffieHellman => "diffie-hellman",
            Bundle::Pairing => "pairing",
        }
    }

    pub fn from_xml_name(name: &str) -> Option<Bundle> {
        Bundle::ALL.into_iter().find(|b| b.xml_name() == name)
    }

    pub fn symbols(self) -> Vec<FunctionSymbol> {
        let s = FunctionSymbol::builtin;
        match self {
            Bundle::SymmetricEncryption => vec![s("senc", 2), s("sdec", 2)],
            Bundle::AsymmetricEncryption => vec![s("aenc", 2), s("adec", 2), s("pk", 1)],
            Bundle::Signing => vec![s("sign", 2), s("verify", 3), s("pk", 1), s("true", 0)],
            Bundle::Hashing => vec![s("h", 1)],
            Bundle::DiffieHellman => vec![Bundle::exp_symbol()],
            Bundle::Pairing => vec![],
        }
    }

    /// Public constants the bundle brings into scope.
    pub fn constants(self) -> Vec<Term> {
        match self {
            Bundle::DiffieHellman => vec![Term::constant("g", Sort::Public)],
            _ => vec![],
        }
    }

    pub fn equations(self) -> Vec<Equation> {
        let s = FunctionSymbol::builtin;
        let app = |f: &FunctionSymbol, args: Vec<Term>| {
            Term::apply(f, args).expect("bundle tables are well-formed")
        };
        let m = || Term::msg("m");
        let k = || Term::msg("k");
        let sk = || Term::msg("sk");
        let eq = |lhs, rhs, orientation| {
            Equation::new(lhs, rhs, orientation).expect("bundle tables are well-formed")
        };
        match self {
            Bundle::SymmetricEncryption => {
                let senc = app(&s("senc", 2), vec![m(), k()]);
                vec![eq(app(&s("sdec", 2), vec![senc, k()]), m(), Orientation::Destructor)]
            }
            Bundle::AsymmetricEncryption => {
                let pk = app(&s("pk", 1), vec![sk()]);
                let aenc = app(&s("aenc", 2), vec![m(), pk]);
                vec![eq(app(&s("adec", 2), vec![aenc, sk()]), m(), Orientation::Destructor)]
            }
            Bundle::Signing => {
                let pk = app(&s("pk", 1), vec![sk()]);
                let sig = app(&s("sign", 2), vec![m(), sk()]);
                let lhs = app(&s("verify", 3), vec![sig, m(), pk]);
                let t = app(&s("true", 0), vec![]);
                vec![eq(lhs, t, Orientation::Destructor)]
            }
            Bundle::DiffieHellman => {
                let exp = Bundle::exp_symbol();
                let (b, x, y) = (Term::msg("b"), Term::msg("x"), Term::msg("y"));
                let lhs = app(&exp, vec![app(&exp, vec![b.clone(), x.clone()]), y.clone()]);
                let rhs = app(&exp, vec![app(&exp, vec![b, y]), x]);
                vec![eq(lhs, rhs, Orientation::Unoriented)]
            }
            Bundle::Hashing | Bundle::Pairing => vec![],
        }
    }

    pub fn exp_symbol() -> FunctionSymbol {
        FunctionSymbol::builtin("exp", 2)
    }

    pub(crate) fn is_exp(symbol: &FunctionSymbol) -> bool {
        symbol.name() == "exp" && symbol.arity() == 2
    }
}
