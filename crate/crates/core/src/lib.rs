pub mod cli;
pub mod driver;
pub mod elliptic;
pub mod fem;
pub mod loads;
pub mod materials;
pub mod mesh;
pub mod parabolic;
pub mod verify;
