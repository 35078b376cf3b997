/// Read-only view of one named parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamView<'a, T> {
    pub name: String,
    pub shape: [usize; 2],
    pub data: &'a [T],
}

/// Uniform access to the learnable tensors of a model, in a fixed order.
///
/// `param_views` and `param_slices_mut` must enumerate the same tensors in
/// the same order; optimizers and checkpoints rely on it.
pub trait Parameters<T> {
    fn param_views(&self) -> Vec<ParamView<'_, T>>;
    fn param_slices_mut(&mut self) -> Vec<&mut [T]>;

    fn param_count(&self) -> usize {
        self.param_views().iter().map(|v| v.data.len()).sum()
    }
}

/// Prefixes every view name with `prefix.`.
pub(crate) fn prefixed<'a, T>(prefix: &str, views: Vec<ParamView<'a, T>>) -> impl Iterator<Item = ParamView<'a, T>> + 'a {
    let prefix = prefix.to_string();
    views.into_iter().map(move |mut v| {
        v.name = format!("{prefix}.{}", v.name);
        v
    })
}
