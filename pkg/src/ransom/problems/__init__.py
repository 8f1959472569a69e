from .matcomp import MatrixCompletionProblem
from .mlp import MlpWelschProblem
from .noise import NoiseSpec, draw_noise
from .quadratic import QuadraticProblem

__all__ = [
    "MatrixCompletionProblem",
    "MlpWelschProblem",
    "NoiseSpec",
    "QuadraticProblem",
    "draw_noise",
]
