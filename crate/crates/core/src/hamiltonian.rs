//! Static spin Hamiltonian: anisotropic Zeeman term plus hyperfine coupling to
//! one nuclear spin, written with Pauli matrices for the electron,
//!
//! ```text
//! H/ħ = (μ_B / 2ħ) Σ_ij B_i g_ij (σ_j ⊗ 1) + ½ Σ_ij A_ij (σ_i ⊗ I_j)
//! ```
//!
//! The hyperfine term uses σ rather than S, so `A` here is twice the `A` of
//! the usual `S·A·I` convention. No rescaling is applied.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, max_abs, rotate_into};
use crate::operators::{kron, pauli, spin_operators, twice_spin};
use crate::units::{megahertz_to_rad_per_s, rad_per_s_to_wavenumber, HBAR, MU_B};
use crate::{CMatrix, C64};

/// Perpendicular g value of the copper porphyrin qubit.
pub const COPPER_G_PERP: f64 = 2.1106;
/// Parallel g value of the copper porphyrin qubit.
pub const COPPER_G_PAR: f64 = 2.0364;
/// Hyperfine A_xx = A_yy, MHz.
pub const COPPER_A_PERP_MHZ: f64 = 79.4;
/// Hyperfine A_zz, MHz.
pub const COPPER_A_PAR_MHZ: f64 = 611.0;

fn symmetrize(m: Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Dimensionless g-tensor, kept symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTensor(Matrix3<f64>);

impl GTensor {
    pub fn new(g: Matrix3<f64>) -> Self {
        Self(symmetrize(g))
    }

    pub fn axial(perp: f64, par: f64) -> Self {
        Self(Matrix3::from_diagonal(&Vector3::new(perp, perp, par)))
    }

    pub fn isotropic(g: f64) -> Self {
        Self(Matrix3::from_diagonal_element(g))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }
}

/// Hyperfine tensor in rad/s, kept symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperfineTensor(Matrix3<f64>);

impl HyperfineTensor {
    pub fn new(a_rad_per_s: Matrix3<f64>) -> Self {
        Self(symmetrize(a_rad_per_s))
    }

    pub fn from_megahertz(a_mhz: Matrix3<f64>) -> Self {
        Self::new(a_mhz.map(megahertz_to_rad_per_s))
    }

    pub fn axial_megahertz(perp: f64, par: f64) -> Self {
        Self::from_megahertz(Matrix3::from_diagonal(&Vector3::new(perp, perp, par)))
    }

    pub fn zero() -> Self {
        Self(Matrix3::zeros())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }
}

/// Electron spin 1/2 coupled to a nuclear spin `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    nuclear_spin: f64,
    pub g: GTensor,
    pub a: HyperfineTensor,
}

impl SpinSystem {
    pub fn new(nuclear_spin: f64, g: GTensor, a: HyperfineTensor) -> Result<Self> {
        twice_spin(nuclear_spin)?;
        Ok(Self { nuclear_spin, g, a })
    }

    /// Cu²⁺ porphyrin: I = 3/2 with the time-averaged g-tensor and the
    /// EPR hyperfine parameters.
    pub fn copper_porphyrin() -> Self {
        Self {
            nuclear_spin: 1.5,
            g: GTensor::axial(COPPER_G_PERP, COPPER_G_PAR),
            a: HyperfineTensor::axial_megahertz(COPPER_A_PERP_MHZ, COPPER_A_PAR_MHZ),
        }
    }

    /// A bare electron spin (I = 0, two levels).
    pub fn electron_only(g: GTensor) -> Self {
        Self {
            nuclear_spin: 0.0,
            g,
            a: HyperfineTensor::zero(),
        }
    }

    pub fn nuclear_spin(&self) -> f64 {
        self.nuclear_spin
    }

    pub fn nuclear_dimension(&self) -> usize {
        twice_spin(self.nuclear_spin).expect("validated on construction") + 1
    }

    pub fn dimension(&self) -> usize {
        2 * self.nuclear_dimension()
    }

    /// Same system with the hyperfine interaction switched off.
    pub fn without_hyperfine(&self) -> Self {
        Self {
            a: HyperfineTensor::zero(),
            ..self.clone()
        }
    }

    /// `σ_j ⊗ 1` for j = x, y, z in the product basis.
    pub fn electron_operators(&self) -> [CMatrix; 3] {
        let id = CMatrix::identity(self.nuclear_dimension(), self.nuclear_dimension());
        pauli().map(|s| kron(&s, &id))
    }
}

/// `H/ħ` in rad/s for a field `b` in tesla.
pub fn build_hamiltonian(sys: &SpinSystem, b: &Vector3<f64>) -> CMatrix {
    let sigma = pauli();
    let nuc = spin_operators(sys.nuclear_spin).expect("validated on construction");
    let nd = nuc.dimension();
    let id = CMatrix::identity(nd, nd);
    let n = 2 * nd;

    let mut h = CMatrix::zeros(n, n);
    let g = sys.g.matrix();
    let zeeman = MU_B / (2.0 * HBAR);
    for j in 0..3 {
        let coeff: f64 = (0..3).map(|i| b[i] * g[(i, j)]).sum::<f64>() * zeeman;
        if coeff != 0.0 {
            h += kron(&sigma[j], &id) * C64::new(coeff, 0.0);
        }
    }
    let a = sys.a.matrix();
    for i in 0..3 {
        for j in 0..3 {
            if a[(i, j)] != 0.0 {
                h += kron(&sigma[i], nuc.component(j)) * C64::new(0.5 * a[(i, j)], 0.0);
            }
        }
    }
    h
}

/// Eigenbasis data of `H/ħ`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Angular frequencies ω_a, ascending.
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, in the product basis.
    pub states: CMatrix,
    /// `⟨a|σ_j ⊗ 1|b⟩` for j = x, y, z.
    pub sigma: [CMatrix; 3],
}

impl EigenSystem {
    pub fn dimension(&self) -> usize {
        self.energies.len()
    }

    /// ω_ab = ω_a − ω_b.
    pub fn transition(&self, a: usize, b: usize) -> f64 {
        self.energies[a] - self.energies[b]
    }

    /// Express a product-basis operator in the eigenbasis.
    pub fn to_eigenbasis(&self, op: &CMatrix) -> CMatrix {
        rotate_into(op, &self.states)
    }

    /// Rebuilds `H/ħ` in the product basis.
    pub fn reconstruct(&self) -> CMatrix {
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dimension(),
            self.energies.iter().map(|&e| C64::new(e, 0.0)),
        ));
        &self.states * d * self.states.adjoint()
    }
}

/// Diagonalizes `H/ħ` for an electron spin 1/2 times a nuclear factor. The
/// electron factor is assumed to be the outer Kronecker factor.
pub fn eigensystem(h: &CMatrix) -> Result<EigenSystem> {
    let n = h.nrows();
    if n == 0 || n % 2 != 0 {
        return Err(Error::domain(format!("dimension {n} is not 2(2I+1)")));
    }
    let (energies, states) = hermitian_eigen(h)?;
    let id = CMatrix::identity(n / 2, n / 2);
    let sigma = pauli().map(|s| {
        let m = rotate_into(&kron(&s, &id), &states);
        (&m + m.adjoint()).scale(0.5)
    });
    Ok(EigenSystem {
        energies,
        states,
        sigma,
    })
}

/// Energy levels along a field ray, one branch per level.
#[derive(Debug, Clone)]
pub struct ZeemanSpectrum {
    pub fields: Vec<f64>,
    /// `levels[k][branch]`, rad/s.
    pub levels: Vec<Vec<f64>>,
}

impl ZeemanSpectrum {
    pub fn branch(&self, index: usize) -> Vec<f64> {
        self.levels.iter().map(|row| row[index]).collect()
    }

    pub fn branch_count(&self) -> usize {
        self.levels.first().map_or(0, Vec::len)
    }

    /// CSV with energies in cm⁻¹.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = String::from("B_tesla");
        for k in 0..self.branch_count() {
            header.push_str(&format!(",E_{}_cm-1", k + 1));
        }
        writeln!(out, "{header}")?;
        for (b, row) in self.fields.iter().zip(&self.levels) {
            write!(out, "{b}")?;
            for e in row {
                write!(out, ",{}", rad_per_s_to_wavenumber(*e))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Levels on a grid of field magnitudes along `direction`. Branches follow
/// eigenvector continuity rather than energy order, so crossings are kept.
pub fn zeeman_spectrum(sys: &SpinSystem, fields: &[f64], direction: &Vector3<f64>) -> Result<ZeemanSpectrum> {
    if fields.iter().any(|&b| !(b >= 0.0)) {
        return Err(Error::domain("field magnitudes must be non-negative"));
    }
    let norm = direction.norm();
    if !(norm > 0.0) {
        return Err(Error::domain("field direction must be non-zero"));
    }
    let dir = direction / norm;

    let n = sys.dimension();
    let mut levels = Vec::with_capacity(fields.len());
    let mut previous: Option<CMatrix> = None;
    for &b in fields {
        let eig = eigensystem(&build_hamiltonian(sys, &(dir * b)))?;
        let assignment = match &previous {
            None => (0..n).collect::<Vec<_>>(),
            Some(prev) => match_by_overlap(prev, &eig.states),
        };
        // assignment[branch] = eigen index
        let row: Vec<f64> = assignment.iter().map(|&k| eig.energies[k]).collect();
        let reordered = CMatrix::from_fn(n, n, |r, c| eig.states[(r, assignment[c])]);
        previous = Some(reordered);
        levels.push(row);
    }
    Ok(ZeemanSpectrum {
        fields: fields.to_vec(),
        levels,
    })
}

/// Greedy maximum-overlap assignment of new eigenvectors to old branches.
fn match_by_overlap(prev: &CMatrix, next: &CMatrix) -> Vec<usize> {
    let n = prev.ncols();
    let overlap = prev.adjoint() * next;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pairs.push((overlap[(i, j)].norm_sqr(), i, j));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut assignment = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (_, i, j) in pairs {
        if assignment[i] == usize::MAX && !taken[j] {
            assignment[i] = j;
            taken[j] = true;
        }
    }
    assignment
}

/// Relative Frobenius error of the eigen-reconstruction; diagnostics only.
pub fn reconstruction_error(h: &CMatrix, eig: &EigenSystem) -> f64 {
    let diff = (h - eig.reconstruct()).norm();
    let scale = h.norm().max(f64::MIN_POSITIVE);
    diff / scale
}

/// Largest deviation of `U†U` from identity.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    max_abs(&(u.adjoint() * u - CMatrix::identity(u.ncols(), u.ncols())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermiticity_defect;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn z_field(b: f64) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, b)
    }

    #[test]
    fn copper_dimension_is_eight() {
        assert_eq!(SpinSystem::copper_porphyrin().dimension(), 8);
        assert_eq!(SpinSystem::electron_only(GTensor::isotropic(2.0)).dimension(), 2);
    }

    #[test]
    fn isotropic_zeeman_levels() {
        let sys = SpinSystem::new(1.5, GTensor::isotropic(2.0), HyperfineTensor::zero()).unwrap();
        let b = 0.7;
        let eig = eigensystem(&build_hamiltonian(&sys, &z_field(b))).unwrap();
        let w = MU_B * b / HBAR;
        for k in 0..4 {
            assert!((eig.energies[k] + w).abs() < 1e-9 * w);
            assert!((eig.energies[k + 4] - w).abs() < 1e-9 * w);
        }
    }

    #[test]
    fn zero_field_without_hyperfine_vanishes() {
        let sys = SpinSystem::copper_porphyrin().without_hyperfine();
        let h = build_hamiltonian(&sys, &Vector3::zeros());
        assert_eq!(max_abs(&h), 0.0);
        let eig = eigensystem(&h).unwrap();
        assert!(eig.energies.iter().all(|&e| e == 0.0));
        assert!(unitarity_defect(&eig.states) < 1e-14);
    }

    #[test]
    fn copper_levels_split_into_upper_and_lower_quartets() {
        let sys = SpinSystem::copper_porphyrin();
        let eig = eigensystem(&build_hamiltonian(&sys, &z_field(0.3))).unwrap();
        let w0 = MU_B * COPPER_G_PAR * 0.3 / (2.0 * HBAR);
        for k in 0..4 {
            assert!(eig.energies[k] < -0.5 * w0);
            assert!(eig.energies[k + 4] > 0.5 * w0);
        }
        assert!(eig.energies.iter().sum::<f64>().abs() < 1e-9 * w0);
    }

    #[test]
    fn eigensystem_invariants() {
        let sys = SpinSystem::copper_porphyrin();
        for b in [0.0, 0.01, 0.1, 1.0, 10.0] {
            let h = build_hamiltonian(&sys, &Vector3::new(0.2 * b, -0.1 * b, b));
            assert!(hermiticity_defect(&h) < 1e-6);
            let eig = eigensystem(&h).unwrap();
            assert!(unitarity_defect(&eig.states) < 1e-10);
            assert!(reconstruction_error(&h, &eig) < 1e-9);
            for s in &eig.sigma {
                assert!(hermiticity_defect(s) < 1e-12);
            }
            assert!(eig.energies.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn pure_zeeman_branches_are_linear() {
        let sys = SpinSystem::copper_porphyrin().without_hyperfine();
        let fields: Vec<f64> = (0..11).map(|k| k as f64 * 0.5).collect();
        let spec = zeeman_spectrum(&sys, &fields, &Vector3::new(1.0, 1.0, 1.0)).unwrap();
        for branch in 0..spec.branch_count() {
            let e = spec.branch(branch);
            let slope = e[10] / fields[10];
            for (b, v) in fields.iter().zip(&e) {
                assert!((v - slope * b).abs() <= 1e-9 * e[10].abs());
            }
        }
    }

    #[test]
    fn zeeman_spectrum_rejects_negative_fields() {
        let sys = SpinSystem::copper_porphyrin();
        assert!(zeeman_spectrum(&sys, &[0.1, -0.2], &Vector3::z()).is_err());
    }

    #[test]
    fn zeeman_csv_shape() {
        let sys = SpinSystem::copper_porphyrin();
        let spec = zeeman_spectrum(&sys, &[0.0, 0.1, 0.2], &Vector3::z()).unwrap();
        let mut buf = Vec::new();
        spec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("B_tesla,E_1_cm-1"));
        assert_eq!(lines[1].split(',').count(), 9);
    }

    fn eigenvalues(sys: &SpinSystem, b: &Vector3<f64>) -> Vec<f64> {
        eigensystem(&build_hamiltonian(sys, b)).unwrap().energies
    }

    proptest! {
        #[test]
        fn frame_covariance(ax in -1.0..1.0f64, ay in -1.0..1.0f64, az in 0.1..1.0f64, angle in 0.0..6.28f64,
                            bx in -2.0..2.0f64, by in -2.0..2.0f64, bz in -2.0..2.0f64,
                            gxy in -0.05..0.05f64, axz in -200.0..200.0f64) {
            let mut g = *GTensor::axial(COPPER_G_PERP, COPPER_G_PAR).matrix();
            g[(0, 1)] = gxy;
            g[(1, 0)] = gxy;
            let mut a = Matrix3::from_diagonal(&Vector3::new(79.4, 79.4, 611.0));
            a[(0, 2)] = axz;
            a[(2, 0)] = axz;
            let sys = SpinSystem::new(1.5, GTensor::new(g), HyperfineTensor::from_megahertz(a)).unwrap();
            let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::new(ax, ay, az)), angle);
            let r = rot.matrix();
            let b = Vector3::new(bx, by, bz);
            let rotated = SpinSystem::new(
                1.5,
                GTensor::new(r * sys.g.matrix() * r.transpose()),
                HyperfineTensor::new(r * sys.a.matrix() * r.transpose()),
            ).unwrap();
            let e1 = eigenvalues(&sys, &b);
            let e2 = eigenvalues(&rotated, &(r * b));
            let scale = e1.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (x, y) in e1.iter().zip(&e2) {
                prop_assert!((x - y).abs() <= 1e-10 * scale);
            }
            let h = build_hamiltonian(&sys, &b);
            prop_assert!(h.trace().norm() <= 1e-12 * scale);
            prop_assert!(e1.iter().sum::<f64>().abs() <= 1e-9 * scale);
        }
    }
}
