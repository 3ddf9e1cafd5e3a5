"""后端包，目前只有 dirac_waveguide。"""
