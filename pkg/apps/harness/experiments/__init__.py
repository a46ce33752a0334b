from . import decomposition, geometry, kernels, square_functions, transforms, weak  # noqa: F401
