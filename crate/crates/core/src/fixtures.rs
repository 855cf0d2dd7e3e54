//! The bundled case studies: Diffie-Hellman key exchange, the
//! Needham-Schroeder public-key protocol and Lowe's fix of it.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fixture {
    pub name: &'static str,
    pub psv: &'static str,
}

pub const DHKE: Fixture = Fixture {
    name: "dhke",
    psv: include_str!("../fixtures/dhke.psv.xml"),
};

pub const NSP: Fixture = Fixture {
    name: "nsp",
    psv: include_str!("../fixtures/nsp.psv.xml"),
};

pub const NSLP: Fixture = Fixture {
    name: "nslp",
    psv: include_str!("../fixtures/nslp.psv.xml"),
};

pub const ALL: [Fixture; 3] = [DHKE, NSP, NSLP];

pub fn get(name: &str) -> Option<Fixture> {
    ALL.into_iter().find(|f| f.name == name)
}
