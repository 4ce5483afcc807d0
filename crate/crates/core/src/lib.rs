//! Novikov-ring transseries, ℏ-connections, exact-WKB Stokes geometry and
//! combinatorial sheaf-quantization data.

pub mod cone;
pub mod novikov;
pub mod ring;
pub mod scalar;
pub mod expr;
pub mod jet;
pub mod numeric;
pub mod poly;
pub mod transseries;
pub mod connection;
pub mod stokes;
pub mod sheaf_quantization;
pub mod cli;

use num_complex::Complex;

/// Exact scalar field: arbitrary-precision rationals.
pub type Rational = num_rational::BigRational;

pub type Novikov32 = novikov::NovikovElement<f32>;
pub type Novikov64 = novikov::NovikovElement<f64>;
pub type NovikovQ = novikov::NovikovElement<Rational>;

pub type Cone32 = cone::ConicRegion<f32>;
pub type Cone64 = cone::ConicRegion<f64>;
pub type ConeQ = cone::ConicRegion<Rational>;

/// Transseries with constant coefficients.
pub type Transseries32 = transseries::Transseries<f32, Complex<f32>>;
pub type Transseries64 = transseries::Transseries<f64, Complex<f64>>;
pub type TransseriesQ = transseries::Transseries<Rational, Complex<Rational>>;

pub type Connection64 = connection::HbarConnection<f64>;
pub type ConnectionQ = connection::HbarConnection<Rational>;

pub type SheafQuantization64 = sheaf_quantization::SheafQuantizationData<f64>;
pub type SheafQuantizationQ = sheaf_quantization::SheafQuantizationData<Rational>;
