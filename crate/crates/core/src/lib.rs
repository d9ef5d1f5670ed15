pub mod bench;
pub mod cleaveland;
pub mod distinguish;
pub mod equivalences;
pub mod hml;
pub mod lts;
pub mod oracle;
pub mod reduction;
