use super::matrix::Matrix;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest relative disagreement between the reverse-mode gradient of `f`
/// and central finite differences with step `h`, over every entry of every
/// parameter.
///
/// `f` receives a fresh tape and one leaf per parameter and must return a
/// `1 x 1` node. Relative error is `|analytic - fd| / max(1, |analytic|)`.
pub fn finite_diff_check<T, F>(f: F, params: &[Matrix<T>], h: T) -> Result<T>
where
    T: Scalar,
    F: Fn(&Tape<T>, &[Var]) -> Result<Var>,
{
    if !(h > T::zero()) {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    let analytic = gradient(&f, params)?;
    let two_h = h + h;
    let mut worst = T::zero();
    let mut probe = params.to_vec();
    for (p, grad) in analytic.iter().enumerate() {
        for k in 0..params[p].len() {
            let orig = params[p].as_slice()[k];
            probe[p].as_mut_slice()[k] = orig + h;
            let up = evaluate(&f, &probe)?;
            probe[p].as_mut_slice()[k] = orig - h;
            let down = evaluate(&f, &probe)?;
            probe[p].as_mut_slice()[k] = orig;
            let fd = (up - down) / two_h;
            let a = grad.as_slice()[k];
            let err = (a - fd).abs() / a.abs().max(T::one());
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}

/// Value of `f` at `params`.
pub fn evaluate<T, F>(f: &F, params: &[Matrix<T>]) -> Result<T>
where
    T: Scalar,
    F: Fn(&Tape<T>, &[Var]) -> Result<Var>,
{
    let tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|m| tape.leaf(m.clone())).collect();
    let out = f(&tape, &vars)?;
    let v = tape.scalar(out);
    if !v.is_finite() {
        return Err(Error::NonFinite("finite-difference probe".into()));
    }
    Ok(v)
}

/// Reverse-mode gradient of `f` with respect to each parameter.
pub fn gradient<T, F>(f: &F, params: &[Matrix<T>]) -> Result<Vec<Matrix<T>>>
where
    T: Scalar,
    F: Fn(&Tape<T>, &[Var]) -> Result<Var>,
{
    let tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|m| tape.leaf(m.clone())).collect();
    let out = f(&tape, &vars)?;
    if !tape.scalar(out).is_finite() {
        return Err(Error::NonFinite("objective".into()));
    }
    let grads = tape.backward(out)?;
    Ok(vars.iter().map(|&v| grads.get(v)).collect())
}
