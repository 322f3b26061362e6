//! Bundled subset of the standard data dictionary.
//!
//! Covers file meta information, the patient/study/series/equipment/image
//! modules used by CT, MR, CR and secondary-capture objects, and the
//! identifying attributes that de-identification profiles act on.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::{Tag, Vr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DictEntry {
    pub tag: Tag,
    pub vr: Vr,
    pub keyword: &'static str,
    pub name: &'static str,
}

macro_rules! dict {
    ($(($t:expr, $vr:ident, $kw:expr, $name:expr)),* $(,)?) => {
        &[$(DictEntry { tag: Tag::from_u32($t), vr: Vr::$vr, keyword: $kw, name: $name }),*]
    };
}

// Sorted by tag.
static ENTRIES: &[DictEntry] = dict![
    (0x0002_0000, UL, "FileMetaInformationGroupLength", "File Meta Information Group Length"),
    (0x0002_0001, OB, "FileMetaInformationVersion", "File Meta Information Version"),
    (0x0002_0002, UI, "MediaStorageSOPClassUID", "Media Storage SOP Class UID"),
    (0x0002_0003, UI, "MediaStorageSOPInstanceUID", "Media Storage SOP Instance UID"),
    (0x0002_0010, UI, "TransferSyntaxUID", "Transfer Syntax UID"),
    (0x0002_0012, UI, "ImplementationClassUID", "Implementation Class UID"),
    (0x0002_0013, SH, "ImplementationVersionName", "Implementation Version Name"),
    (0x0002_0016, AE, "SourceApplicationEntityTitle", "Source Application Entity Title"),
    (0x0004_1500, CS, "ReferencedFileID", "Referenced File ID"),
    (0x0008_0005, CS, "SpecificCharacterSet", "Specific Character Set"),
    (0x0008_0008, CS, "ImageType", "Image Type"),
    (0x0008_0012, DA, "InstanceCreationDate", "Instance Creation Date"),
    (0x0008_0013, TM, "InstanceCreationTime", "Instance Creation Time"),
    (0x0008_0014, UI, "InstanceCreatorUID", "Instance Creator UID"),
    (0x0008_0016, UI, "SOPClassUID", "SOP Class UID"),
    (0x0008_0018, UI, "SOPInstanceUID", "SOP Instance UID"),
    (0x0008_0020, DA, "StudyDate", "Study Date"),
    (0x0008_0021, DA, "SeriesDate", "Series Date"),
    (0x0008_0022, DA, "AcquisitionDate", "Acquisition Date"),
    (0x0008_0023, DA, "ContentDate", "Content Date"),
    (0x0008_002A, DT, "AcquisitionDateTime", "Acquisition DateTime"),
    (0x0008_0030, TM, "StudyTime", "Study Time"),
    (0x0008_0031, TM, "SeriesTime", "Series Time"),
    (0x0008_0032, TM, "AcquisitionTime", "Acquisition Time"),
    (0x0008_0033, TM, "ContentTime", "Content Time"),
    (0x0008_0050, SH, "AccessionNumber", "Accession Number"),
    (0x0008_0060, CS, "Modality", "Modality"),
    (0x0008_0064, CS, "ConversionType", "Conversion Type"),
    (0x0008_0068, CS, "PresentationIntentType", "Presentation Intent Type"),
    (0x0008_0070, LO, "Manufacturer", "Manufacturer"),
    (0x0008_0080, LO, "InstitutionName", "Institution Name"),
    (0x0008_0081, ST, "InstitutionAddress", "Institution Address"),
    (0x0008_0090, PN, "ReferringPhysicianName", "Referring Physician's Name"),
    (0x0008_0092, ST, "ReferringPhysicianAddress", "Referring Physician's Address"),
    (0x0008_0094, SH, "ReferringPhysicianTelephoneNumbers", "Referring Physician's Telephone Numbers"),
    (0x0008_0100, SH, "CodeValue", "Code Value"),
    (0x0008_0102, SH, "CodingSchemeDesignator", "Coding Scheme Designator"),
    (0x0008_0104, LO, "CodeMeaning", "Code Meaning"),
    (0x0008_010C, UI, "CodingSchemeUID", "Coding Scheme UID"),
    (0x0008_0201, SH, "TimezoneOffsetFromUTC", "Timezone Offset From UTC"),
    (0x0008_1010, SH, "StationName", "Station Name"),
    (0x0008_1030, LO, "StudyDescription", "Study Description"),
    (0x0008_1032, SQ, "ProcedureCodeSequence", "Procedure Code Sequence"),
    (0x0008_103E, LO, "SeriesDescription", "Series Description"),
    (0x0008_1040, LO, "InstitutionalDepartmentName", "Institutional Department Name"),
    (0x0008_1048, PN, "PhysiciansOfRecord", "Physician(s) of Record"),
    (0x0008_1050, PN, "PerformingPhysicianName", "Performing Physician's Name"),
    (0x0008_1060, PN, "NameOfPhysiciansReadingStudy", "Name of Physician(s) Reading Study"),
    (0x0008_1070, PN, "OperatorsName", "Operators' Name"),
    (0x0008_1080, LO, "AdmittingDiagnosesDescription", "Admitting Diagnoses Description"),
    (0x0008_1090, LO, "ManufacturerModelName", "Manufacturer's Model Name"),
    (0x0008_1110, SQ, "ReferencedStudySequence", "Referenced Study Sequence"),
    (0x0008_1111, SQ, "ReferencedPerformedProcedureStepSequence", "Referenced Performed Procedure Step Sequence"),
    (0x0008_1115, SQ, "ReferencedSeriesSequence", "Referenced Series Sequence"),
    (0x0008_1120, SQ, "ReferencedPatientSequence", "Referenced Patient Sequence"),
    (0x0008_1140, SQ, "ReferencedImageSequence", "Referenced Image Sequence"),
    (0x0008_1150, UI, "ReferencedSOPClassUID", "Referenced SOP Class UID"),
    (0x0008_1155, UI, "ReferencedSOPInstanceUID", "Referenced SOP Instance UID"),
    (0x0008_1160, IS, "ReferencedFrameNumber", "Referenced Frame Number"),
    (0x0008_2111, ST, "DerivationDescription", "Derivation Description"),
    (0x0008_2112, SQ, "SourceImageSequence", "Source Image Sequence"),
    (0x0008_3010, UI, "IrradiationEventUID", "Irradiation Event UID"),
    (0x0010_0010, PN, "PatientName", "Patient's Name"),
    (0x0010_0020, LO, "PatientID", "Patient ID"),
    (0x0010_0021, LO, "IssuerOfPatientID", "Issuer of Patient ID"),
    (0x0010_0030, DA, "PatientBirthDate", "Patient's Birth Date"),
    (0x0010_0032, TM, "PatientBirthTime", "Patient's Birth Time"),
    (0x0010_0040, CS, "PatientSex", "Patient's Sex"),
    (0x0010_1000, LO, "OtherPatientIDs", "Other Patient IDs"),
    (0x0010_1001, PN, "OtherPatientNames", "Other Patient Names"),
    (0x0010_1005, PN, "PatientBirthName", "Patient's Birth Name"),
    (0x0010_1010, AS, "PatientAge", "Patient's Age"),
    (0x0010_1020, DS, "PatientSize", "Patient's Size"),
    (0x0010_1030, DS, "PatientWeight", "Patient's Weight"),
    (0x0010_1040, LO, "PatientAddress", "Patient's Address"),
    (0x0010_1060, PN, "PatientMotherBirthName", "Patient's Mother's Birth Name"),
    (0x0010_1080, LO, "MilitaryRank", "Military Rank"),
    (0x0010_1090, LO, "MedicalRecordLocator", "Medical Record Locator"),
    (0x0010_2000, LO, "MedicalAlerts", "Medical Alerts"),
    (0x0010_2110, LO, "Allergies", "Allergies"),
    (0x0010_2150, LO, "CountryOfResidence", "Country of Residence"),
    (0x0010_2152, LO, "RegionOfResidence", "Region of Residence"),
    (0x0010_2154, SH, "PatientTelephoneNumbers", "Patient's Telephone Numbers"),
    (0x0010_2160, SH, "EthnicGroup", "Ethnic Group"),
    (0x0010_2180, SH, "Occupation", "Occupation"),
    (0x0010_21A0, CS, "SmokingStatus", "Smoking Status"),
    (0x0010_21B0, LT, "AdditionalPatientHistory", "Additional Patient History"),
    (0x0010_21C0, US, "PregnancyStatus", "Pregnancy Status"),
    (0x0010_21D0, DA, "LastMenstrualDate", "Last Menstrual Date"),
    (0x0010_21F0, LO, "PatientReligiousPreference", "Patient's Religious Preference"),
    (0x0010_4000, LT, "PatientComments", "Patient Comments"),
    (0x0012_0040, LO, "ClinicalTrialSubjectID", "Clinical Trial Subject ID"),
    (0x0012_0062, CS, "PatientIdentityRemoved", "Patient Identity Removed"),
    (0x0012_0063, LO, "DeidentificationMethod", "De-identification Method"),
    (0x0012_0071, LO, "ClinicalTrialSeriesID", "Clinical Trial Series ID"),
    (0x0018_0010, LO, "ContrastBolusAgent", "Contrast/Bolus Agent"),
    (0x0018_0015, CS, "BodyPartExamined", "Body Part Examined"),
    (0x0018_0020, CS, "ScanningSequence", "Scanning Sequence"),
    (0x0018_0021, CS, "SequenceVariant", "Sequence Variant"),
    (0x0018_0022, CS, "ScanOptions", "Scan Options"),
    (0x0018_0023, CS, "MRAcquisitionType", "MR Acquisition Type"),
    (0x0018_0050, DS, "SliceThickness", "Slice Thickness"),
    (0x0018_0060, DS, "KVP", "KVP"),
    (0x0018_0080, DS, "RepetitionTime", "Repetition Time"),
    (0x0018_0081, DS, "EchoTime", "Echo Time"),
    (0x0018_0087, DS, "MagneticFieldStrength", "Magnetic Field Strength"),
    (0x0018_1000, LO, "DeviceSerialNumber", "Device Serial Number"),
    (0x0018_1002, UI, "DeviceUID", "Device UID"),
    (0x0018_1004, LO, "PlateID", "Plate ID"),
    (0x0018_1020, LO, "SoftwareVersions", "Software Versions"),
    (0x0018_1030, LO, "ProtocolName", "Protocol Name"),
    (0x0018_1150, IS, "ExposureTime", "Exposure Time"),
    (0x0018_1151, IS, "XRayTubeCurrent", "X-Ray Tube Current"),
    (0x0018_1164, DS, "ImagerPixelSpacing", "Imager Pixel Spacing"),
    (0x0018_5100, CS, "PatientPosition", "Patient Position"),
    (0x0018_5101, CS, "ViewPosition", "View Position"),
    (0x0020_000D, UI, "StudyInstanceUID", "Study Instance UID"),
    (0x0020_000E, UI, "SeriesInstanceUID", "Series Instance UID"),
    (0x0020_0010, SH, "StudyID", "Study ID"),
    (0x0020_0011, IS, "SeriesNumber", "Series Number"),
    (0x0020_0012, IS, "AcquisitionNumber", "Acquisition Number"),
    (0x0020_0013, IS, "InstanceNumber", "Instance Number"),
    (0x0020_0020, CS, "PatientOrientation", "Patient Orientation"),
    (0x0020_0032, DS, "ImagePositionPatient", "Image Position (Patient)"),
    (0x0020_0037, DS, "ImageOrientationPatient", "Image Orientation (Patient)"),
    (0x0020_0052, UI, "FrameOfReferenceUID", "Frame of Reference UID"),
    (0x0020_0060, CS, "Laterality", "Laterality"),
    (0x0020_1040, LO, "PositionReferenceIndicator", "Position Reference Indicator"),
    (0x0020_1041, DS, "SliceLocation", "Slice Location"),
    (0x0020_4000, LT, "ImageComments", "Image Comments"),
    (0x0020_9158, LT, "FrameComments", "Frame Comments"),
    (0x0028_0002, US, "SamplesPerPixel", "Samples per Pixel"),
    (0x0028_0004, CS, "PhotometricInterpretation", "Photometric Interpretation"),
    (0x0028_0006, US, "PlanarConfiguration", "Planar Configuration"),
    (0x0028_0008, IS, "NumberOfFrames", "Number of Frames"),
    (0x0028_0010, US, "Rows", "Rows"),
    (0x0028_0011, US, "Columns", "Columns"),
    (0x0028_0030, DS, "PixelSpacing", "Pixel Spacing"),
    (0x0028_0100, US, "BitsAllocated", "Bits Allocated"),
    (0x0028_0101, US, "BitsStored", "Bits Stored"),
    (0x0028_0102, US, "HighBit", "High Bit"),
    (0x0028_0103, US, "PixelRepresentation", "Pixel Representation"),
    (0x0028_0301, CS, "BurnedInAnnotation", "Burned In Annotation"),
    (0x0028_1050, DS, "WindowCenter", "Window Center"),
    (0x0028_1051, DS, "WindowWidth", "Window Width"),
    (0x0028_1052, DS, "RescaleIntercept", "Rescale Intercept"),
    (0x0028_1053, DS, "RescaleSlope", "Rescale Slope"),
    (0x0032_1032, PN, "RequestingPhysician", "Requesting Physician"),
    (0x0032_1033, LO, "RequestingService", "Requesting Service"),
    (0x0032_1060, LO, "RequestedProcedureDescription", "Requested Procedure Description"),
    (0x0032_4000, LT, "StudyComments", "Study Comments"),
    (0x0038_0010, LO, "AdmissionID", "Admission ID"),
    (0x0038_0050, LO, "SpecialNeeds", "Special Needs"),
    (0x0038_0300, LO, "CurrentPatientLocation", "Current Patient Location"),
    (0x0038_0500, LO, "PatientState", "Patient State"),
    (0x0038_4000, LT, "VisitComments", "Visit Comments"),
    (0x0040_0241, AE, "PerformedStationAETitle", "Performed Station AE Title"),
    (0x0040_0242, SH, "PerformedStationName", "Performed Station Name"),
    (0x0040_0243, SH, "PerformedLocation", "Performed Location"),
    (0x0040_0244, DA, "PerformedProcedureStepStartDate", "Performed Procedure Step Start Date"),
    (0x0040_0245, TM, "PerformedProcedureStepStartTime", "Performed Procedure Step Start Time"),
    (0x0040_0253, SH, "PerformedProcedureStepID", "Performed Procedure Step ID"),
    (0x0040_0254, LO, "PerformedProcedureStepDescription", "Performed Procedure Step Description"),
    (0x0040_0275, SQ, "RequestAttributesSequence", "Request Attributes Sequence"),
    (0x0040_0280, ST, "CommentsOnThePerformedProcedureStep", "Comments on the Performed Procedure Step"),
    (0x0040_1001, SH, "RequestedProcedureID", "Requested Procedure ID"),
    (0x0040_1400, LT, "RequestedProcedureComments", "Requested Procedure Comments"),
    (0x0040_2016, LO, "PlacerOrderNumberImagingServiceRequest", "Placer Order Number / Imaging Service Request"),
    (0x0040_2017, LO, "FillerOrderNumberImagingServiceRequest", "Filler Order Number / Imaging Service Request"),
    (0x0040_2400, LT, "ImagingServiceRequestComments", "Imaging Service Request Comments"),
    (0x0040_A124, UI, "UID", "UID"),
    (0x0040_A730, SQ, "ContentSequence", "Content Sequence"),
    (0x0088_0140, UI, "StorageMediaFileSetUID", "Storage Media File-set UID"),
    (0x2050_0020, CS, "PresentationLUTShape", "Presentation LUT Shape"),
    (0x3006_0024, UI, "ReferencedFrameOfReferenceUID", "Referenced Frame of Reference UID"),
    (0x4008_0114, PN, "PhysicianApprovingInterpretation", "Physician Approving Interpretation"),
    (0x4008_0300, ST, "Impressions", "Impressions"),
    (0x7FE0_0010, OW, "PixelData", "Pixel Data"),
    (0xFFFA_FFFA, SQ, "DigitalSignaturesSequence", "Digital Signatures Sequence"),
];

/// Look up a standard attribute.
pub fn lookup(tag: Tag) -> Option<&'static DictEntry> {
    ENTRIES
        .binary_search_by_key(&tag, |e| e.tag)
        .ok()
        .map(|i| &ENTRIES[i])
}

/// Look up an attribute by keyword (`PatientName`).
pub fn by_keyword(keyword: &str) -> Option<&'static DictEntry> {
    static INDEX: OnceLock<HashMap<&'static str, usize>> = OnceLock::new();
    let index = INDEX.get_or_init(|| ENTRIES.iter().enumerate().map(|(i, e)| (e.keyword, i)).collect());
    index.get(keyword).map(|&i| &ENTRIES[i])
}

/// VR implied by the tag alone, as needed when reading implicit-VR data.
///
/// Falls back to the generic rules for group lengths and private creators.
pub fn implied_vr(tag: Tag) -> Option<Vr> {
    if let Some(e) = lookup(tag) {
        return Some(e.vr);
    }
    if tag.is_group_length() {
        return Some(Vr::UL);
    }
    if tag.is_private_creator() {
        return Some(Vr::LO);
    }
    None
}

/// Human-readable attribute name, with fallbacks for private data.
pub fn display_name(tag: Tag) -> String {
    if let Some(e) = lookup(tag) {
        e.name.to_string()
    } else if tag.is_private_creator() {
        "Private Creator".to_string()
    } else if tag.is_private() {
        format!("Private Tag {tag}")
    } else {
        tag.to_string()
    }
}

pub fn keyword(tag: Tag) -> Option<&'static str> {
    lookup(tag).map(|e| e.keyword)
}

pub fn entries() -> &'static [DictEntry] {
    ENTRIES
}
