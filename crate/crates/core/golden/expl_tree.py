class Tree:
  def __init__(self):
    self.belief = "Cannabis should be legal."
    self.argument = "It's not a bad thing to make marijuana more available."
    self.stance = "support"

    # tree for support in support of belief
    root_nodes = cannabis
    cannabis = Node()
    cannabis.add_edge("synonym of", "marijuana")
    legal = Node()
    legal.add_edge("causes", "more available")
    marijuana = Node()
    marijuana.add_edge("capable of", "good thing")
    good_thing = Node()
    good_thing.add_edge("desires", "legal")
