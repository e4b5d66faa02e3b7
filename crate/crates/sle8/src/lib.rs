pub mod coulomb;
pub mod linkpat;
pub mod loewner;
pub mod quad;
pub mod scmap;
pub mod special;
pub mod ust;
pub mod verify;
