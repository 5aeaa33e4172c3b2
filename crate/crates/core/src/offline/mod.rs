pub mod campaign;
pub mod eim;
pub mod pod;
pub mod projection;
pub mod model;
pub mod archive;
