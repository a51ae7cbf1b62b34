"""Positive/negative-class ("Rumi") GANs on a small numpy autodiff engine.

Modules: ``tensor``/``linalg``/``nn`` (math core), ``distributions``,
``losses``, ``oracles``, ``training``, ``evaluation``, ``mnist``,
``config`` and ``cli``.
"""

__version__ = "0.1.0"
