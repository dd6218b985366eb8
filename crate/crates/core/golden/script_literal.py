class CreateAVideoGame:

  title = "create a video game"
  steps = 7

  def step0(self):
    return "decided to create a video game"
  def step1(self):
    return "Learn the basics of programming"
  def step2(self):
    return "Learn to use a language that is used in games"
  def step3(self):
    return "Learn to use an existing game engine"
  def step4(self):
    return "Program the game"
  def step5(self):
    return "Test the game"
  def step6(self):
    return "create a video game"
  def get_relations(self):
    return [
      "step0 -> step1",
      "step1 -> step2",
      "step1 -> step3",
      "step2 -> step4",
      "step3 -> step4",
      "step4 -> step5",
      "step5 -> step6",
    ]
