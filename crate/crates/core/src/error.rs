use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid height bins: {0}")]
    InvalidBins(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("invalid world spec: {0}")]
    InvalidWorldSpec(String),
    #[error("invalid BEV spec: {0}")]
    InvalidBevSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unknown encoder `{0}`")]
    UnknownEncoder(String),
    #[error("BEV ({bev} cells) larger than map tile ({tile} cells) after encoding")]
    BevLargerThanTile { bev: usize, tile: usize },
    #[error("prior heading is missing or not finite")]
    MissingHeading,
    #[error("error list is empty")]
    EmptyErrors,
    #[error("invalid localization error value {0}")]
    InvalidErrorValue(f64),
}
