"""Random-walk Green's function on a 5-dimensional torus.

Prints S_1 along an axis against a_d / (sigma^2 |x|^3), the sup deviation
over the window 5 <= |x| <= 8, and the sup-ratio stability of the two
convolution bounds under box doubling.
"""
from lacelab import greens as gr

if __name__ == "__main__":
    d, M = 5, 33
    print(f"a_{d} = {gr.a_d(d):.10f}")
    for x, s, pred, ratio in gr.green_profile(d, M, 1.0, axis_points=9):
        print(f"  x={x}  S_1={s:.6e}  predicted={pred:.6e}  ratio={ratio:.4f}")
    dev, info = gr.check_green_asymptotics(d, M, details=True)
    print(f"window [5, 8]: deviation {dev:.4f} over {info['points']} points")
    print(f"window [2, 3]: deviation {gr.check_green_asymptotics(d, M, window=(2, 3)):.4f}")

    for args in ((1, 2, 2, [64, 128]), (2, 3, 2, [32, 64])):
        sups, growth = gr.conv_growth(*args)
        print(f"conv d={args[0]} a={args[1]} b={args[2]}: {sups}  growth {growth:.4f}")
    sups, growth = gr.star_growth(3, 2, [16, 32])
    print(f"star d=3 q=2: {sups}  growth {growth:.4f}")
