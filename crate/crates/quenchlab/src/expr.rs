//! User source terms written as expressions in `s`.

use evalexpr::{ContextWithMutableVariables, HashMapContext, Node, Value};

/// Compiles `text` once; the returned closure evaluates it at `s`.
pub fn compile(
    text: &str,
) -> Result<impl Fn(f64) -> Result<f64, String> + Send + Sync + 'static, String> {
    let node: Node = evalexpr::build_operator_tree(text).map_err(|e| e.to_string())?;
    let vars: Vec<String> = node.iter_variable_identifiers().map(str::to_string).collect();
    if let Some(bad) = vars.iter().find(|v| v.as_str() != "s") {
        return Err(format!("unknown variable `{bad}` (only `s` is bound)"));
    }
    let eval = move |s: f64| -> Result<f64, String> {
        let mut ctx = HashMapContext::new();
        ctx.set_value("s".into(), Value::Float(s))
            .map_err(|e| e.to_string())?;
        node.eval_number_with_context(&ctx).map_err(|e| e.to_string())
    };
    // fail at load time rather than mid-run
    eval(1.0)?;
    Ok(eval)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_polynomials_and_functions() {
        let f = compile("s^2 + 0.5 * s").unwrap();
        assert_eq!(f(2.0).unwrap(), 5.0);
        let g = compile("math::exp(s) - 1").unwrap();
        assert!((g(1.0).unwrap() - (1f64.exp() - 1.0)).abs() < 1e-15);
        assert_eq!(compile("3").unwrap()(7.0).unwrap(), 3.0);
    }

    #[test]
    fn rejects_syntax_errors_and_free_variables() {
        assert!(compile("s +").is_err());
        assert!(compile("s * t").err().unwrap().contains("`t`"));
    }
}
