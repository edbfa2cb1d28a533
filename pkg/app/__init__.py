# polytransfer: transfer inequalities for low-degree polynomials
