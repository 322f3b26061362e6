use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! vrs {
    ($($name:ident),* $(,)?) => {
        /// Value representation of a data element.
        #[allow(clippy::upper_case_acronyms)]
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Vr { $($name),* }

        impl Vr {
            pub const ALL: &'static [Vr] = &[$(Vr::$name),*];

            pub fn code(self) -> &'static str {
                match self { $(Vr::$name => stringify!($name)),* }
            }

            pub fn from_code(code: &[u8]) -> Option<Vr> {
                match code { $(c if c == stringify!($name).as_bytes() => Some(Vr::$name),)* _ => None }
            }
        }
    };
}

vrs!(
    AE, AS, AT, CS, DA, DS, DT, FD, FL, IS, LO, LT, OB, OD, OF, OL, OV, OW, PN, SH, SL, SQ, SS, ST,
    SV, TM, UC, UI, UL, UN, UR, US, UT, UV,
);

/// Coarse grouping used by de-identification rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VrClass {
    /// Free or semi-free text: LO, LT, SH, PN, CS, ST, UT.
    Text,
    /// DA, DT, TM.
    Date,
    /// UI.
    Uid,
    Other,
}

impl Vr {
    /// Explicit-VR encoding uses a 2-byte reserved field plus a 4-byte length
    /// for these; everything else gets a 2-byte length.
    pub fn has_long_length(self) -> bool {
        matches!(
            self,
            Vr::OB
                | Vr::OD
                | Vr::OF
                | Vr::OL
                | Vr::OV
                | Vr::OW
                | Vr::SQ
                | Vr::SV
                | Vr::UC
                | Vr::UN
                | Vr::UR
                | Vr::UT
                | Vr::UV
        )
    }

    /// Byte used to pad odd-length values, or `None` when the VR has an
    /// inherently even width and an odd length is malformed.
    pub fn padding(self) -> Option<u8> {
        match self {
            Vr::UI | Vr::OB | Vr::UN => Some(0),
            Vr::AE
            | Vr::AS
            | Vr::CS
            | Vr::DA
            | Vr::DS
            | Vr::DT
            | Vr::IS
            | Vr::LO
            | Vr::LT
            | Vr::PN
            | Vr::SH
            | Vr::ST
            | Vr::TM
            | Vr::UC
            | Vr::UR
            | Vr::UT => Some(b' '),
            _ => None,
        }
    }

    /// Character-string VRs whose bytes decode to text.
    pub fn is_string(self) -> bool {
        self.padding() == Some(b' ') || self == Vr::UI
    }

    /// LT, ST, UT and UR are single-valued: a backslash is ordinary text.
    pub fn is_single_valued_text(self) -> bool {
        matches!(self, Vr::LT | Vr::ST | Vr::UT | Vr::UR)
    }

    pub fn class(self) -> VrClass {
        match self {
            Vr::LO | Vr::LT | Vr::SH | Vr::PN | Vr::CS | Vr::ST | Vr::UT => VrClass::Text,
            Vr::DA | Vr::DT | Vr::TM => VrClass::Date,
            Vr::UI => VrClass::Uid,
            _ => VrClass::Other,
        }
    }
}

impl fmt::Display for Vr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown value representation {0:?}")]
pub struct ParseVrError(pub String);

impl FromStr for Vr {
    type Err = ParseVrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Vr::from_code(s.trim().to_ascii_uppercase().as_bytes()).ok_or_else(|| ParseVrError(s.into()))
    }
}

impl Serialize for Vr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Vr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for VrClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VrClass::Text => "text",
            VrClass::Date => "date",
            VrClass::Uid => "uid",
            VrClass::Other => "other",
        })
    }
}

impl FromStr for VrClass {
    type Err = ParseVrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(VrClass::Text),
            "date" => Ok(VrClass::Date),
            "uid" => Ok(VrClass::Uid),
            "other" => Ok(VrClass::Other),
            _ => Err(ParseVrError(s.into())),
        }
    }
}
