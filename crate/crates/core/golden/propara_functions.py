def main():
  # init
  # roots absorb water from soil
  # the water flows to the leaf
  # state_0 tracks the location/state water
  # state_1 tracks the location/state light
  # state_2 tracks the location/state CO2
  def init():
    state_0 = "soil"
    state_1 = "sun"
    state_2 = None
  def roots_absorb_water_from_soil():
    state_0 = "roots"
    state_1 = "sun"
    state_2 = "UNK"
  def water_flows_to_leaf():
    state_0 = "leaf"
    state_1 = "sun"
    state_2 = "UNK"
