"""Upper bounds for the pluricomplex extremal function of an open set in C^n.

Values are infima of functionals over rational analytic discs in P^n
centred at the evaluation point.  Modules:

core         projective points and circle quadrature grids
domains      open sets with membership tests and boundary distances; JSON I/O
discs        rational discs, zeros of the zeroth component, explicit families
functionals  J, boundary integrals, the ball-majorant functional, Jensen residual
gluing       combining a circle's worth of discs into a single disc
envelopes    optimisers over disc classes and the inscribed-ball envelope
oracles      closed-form and brute-force reference values
cli          command-line front end
"""
__version__ = "0.1.0"
